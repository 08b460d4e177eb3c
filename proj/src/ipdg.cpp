#include "gmswave/ipdg.hpp"

#include "gmswave/lanczos.hpp"
#include "gmswave/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>

namespace gmswave {

namespace {

struct CellCorners {
  int l00, l10, l11, l01;  ///< block-local node indices of a cell's corners
};

CellCorners cell_corners_local(const FineMesh& fine, const CoarseBlock& blk, int cell) {
  const int ci = cell % fine.nx;
  const int cj = cell / fine.nx;
  const int li = ci - blk.i0;
  const int lj = cj - blk.j0;
  return {blk.local_index(li, lj), blk.local_index(li + 1, lj), blk.local_index(li + 1, lj + 1),
          blk.local_index(li, lj + 1)};
}

/// Flux rows a grad(u).n at both endpoints of one sub-edge, for all modes.
void flux_rows(const FineMesh& fine, const CoefficientField& field, const CoarseBlock& blk,
               const CoarseEdge& edge, int cell, const Mat& modes, Mat& flux, int row0) {
  const CellCorners c = cell_corners_local(fine, blk, cell);
  const Real factor = field.at(cell) * edge.normal_sign / fine.h;
  if (edge.normal_axis == 0) {
    flux.row(row0) = factor * (modes.row(c.l10) - modes.row(c.l00));
    flux.row(row0 + 1) = factor * (modes.row(c.l11) - modes.row(c.l01));
  } else {
    flux.row(row0) = factor * (modes.row(c.l01) - modes.row(c.l00));
    flux.row(row0 + 1) = factor * (modes.row(c.l11) - modes.row(c.l10));
  }
}

Mat gather_rows(const Mat& modes, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), modes.cols());
  for (size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = modes.row(rows[r]);
  return out;
}

/// Pairing matrix of per-sub-edge linear functions (2B endpoint rows) against
/// nodal linear functions (B+1 node rows): int_s f g over each sub-edge.
Mat segment_pairing(int n_sub, Real h) {
  Mat g = Mat::Zero(2 * n_sub, n_sub + 1);
  for (int s = 0; s < n_sub; ++s) {
    g(2 * s, s) += h / 3.0;
    g(2 * s, s + 1) += h / 6.0;
    g(2 * s + 1, s) += h / 6.0;
    g(2 * s + 1, s + 1) += h / 3.0;
  }
  return g;
}

/// Weighted nodal mass on the edge polyline: per-segment coefficient w[s].
Mat weighted_edge_mass(const Vec& w, Real h) {
  const int n_sub = static_cast<int>(w.size());
  Mat m = Mat::Zero(n_sub + 1, n_sub + 1);
  for (int s = 0; s < n_sub; ++s) {
    m(s, s) += w[s] * h / 3.0;
    m(s + 1, s + 1) += w[s] * h / 3.0;
    m(s, s + 1) += w[s] * h / 6.0;
    m(s + 1, s) += w[s] * h / 6.0;
  }
  return m;
}

struct EdgeContribution {
  Mat cons;  ///< -int {a grad u.n}[v] - int {a grad v.n}[u]
  Mat pen;   ///< (gamma/len) int a [u][v]
};

EdgeContribution edge_contribution(const EdgeTraces& tr, const CoarseEdge& edge, Real h,
                                   Real gamma_over_len) {
  const int d_plus = static_cast<int>(tr.trace_plus.cols());
  const int d_minus = edge.on_boundary() ? 0 : static_cast<int>(tr.trace_minus.cols());
  const int d = d_plus + d_minus;
  const int n_sub = edge.sub_count();

  Mat jump(n_sub + 1, d);
  jump.leftCols(d_plus) = tr.trace_plus;
  if (d_minus) jump.rightCols(d_minus) = -tr.trace_minus;

  Mat favg(2 * n_sub, d);
  if (edge.on_boundary()) {
    favg = tr.flux_plus;
  } else {
    favg.leftCols(d_plus) = 0.5 * tr.flux_plus;
    favg.rightCols(d_minus) = 0.5 * tr.flux_minus;
  }

  const Mat g = segment_pairing(n_sub, h);
  const Mat x = favg.transpose() * (g * jump);

  EdgeContribution out;
  out.cons = -x - x.transpose();
  Mat pen = jump.transpose() * (weighted_edge_mass(gamma_over_len * tr.a_penalty, h) * jump);
  out.pen = 0.5 * (pen + pen.transpose());
  return out;
}

void append_block(std::vector<Triplet>& tr, const Mat& block, int row0, int col0) {
  for (int j = 0; j < block.cols(); ++j)
    for (int i = 0; i < block.rows(); ++i)
      if (block(i, j) != 0) tr.emplace_back(row0 + i, col0 + j, block(i, j));
}

}  // namespace

void DGSystem::solve_mass_inplace(Vec& x) const {
  for (int k = 0; k < block_count(); ++k) {
    const int o = offsets[k];
    const int d = offsets[k + 1] - o;
    x.segment(o, d) = mass_llt[k].solve(x.segment(o, d).eval());
  }
}

Vec DGSystem::apply_mass(const Vec& x) const {
  Vec y(x.size());
  for (int k = 0; k < block_count(); ++k) {
    const int o = offsets[k];
    const int d = offsets[k + 1] - o;
    y.segment(o, d) = mass_blocks[k] * x.segment(o, d);
  }
  return y;
}

Mat block_modes(const BlockBasis& bb) {
  Mat w(bb.boundary_modes.rows(), bb.dof_count());
  w.leftCols(bb.p) = bb.boundary_modes;
  if (bb.m) w.rightCols(bb.m) = bb.interior_modes;
  return w;
}

EdgeTraces trace_terms(const FineMesh& fine, const CoefficientField& field, const CoarseMesh& coarse,
                       const CoarseEdge& edge, const Mat& modes_plus, const Mat& modes_minus) {
  if (edge.nodes_plus_local.empty()) throw InternalError("edge missing orientation metadata");
  EdgeTraces tr;
  const CoarseBlock& kp = coarse.blocks[edge.block_plus];
  const int n_sub = edge.sub_count();

  tr.trace_plus = gather_rows(modes_plus, edge.nodes_plus_local);
  tr.flux_plus.resize(2 * n_sub, modes_plus.cols());
  for (int s = 0; s < n_sub; ++s)
    flux_rows(fine, field, kp, edge, edge.subs[s].cell_plus, modes_plus, tr.flux_plus, 2 * s);

  tr.a_penalty.resize(n_sub);
  if (edge.on_boundary()) {
    for (int s = 0; s < n_sub; ++s) tr.a_penalty[s] = field.at(edge.subs[s].cell_plus);
  } else {
    const CoarseBlock& km = coarse.blocks[edge.block_minus];
    tr.trace_minus = gather_rows(modes_minus, edge.nodes_minus_local);
    tr.flux_minus.resize(2 * n_sub, modes_minus.cols());
    for (int s = 0; s < n_sub; ++s) {
      flux_rows(fine, field, km, edge, edge.subs[s].cell_minus, modes_minus, tr.flux_minus, 2 * s);
      const Real ap = field.at(edge.subs[s].cell_plus);
      const Real am = field.at(edge.subs[s].cell_minus);
      tr.a_penalty[s] = 2.0 * ap * am / (ap + am);
    }
  }
  return tr;
}

Mat edge_average(const CoarseEdge& edge, const Mat& value_plus, const Mat& value_minus) {
  return edge.on_boundary() ? value_plus : Mat(0.5 * (value_plus + value_minus));
}

Mat edge_jump(const CoarseEdge& edge, const Mat& value_plus, const Mat& value_minus) {
  return edge.on_boundary() ? value_plus : Mat(value_plus - value_minus);
}

DGSystem assemble_adg(const LocalBasisBank& bank, const FineMesh& fine, const CoarseMesh& coarse,
                      const CoefficientField& field, const DGParams& params, int threads) {
  if (bank.blocks.size() != coarse.blocks.size())
    throw ConfigError("bank does not match the coarse mesh");

  DGSystem sys;
  sys.params = params;
  sys.offsets = bank.offsets;
  const int n = bank.total_dofs();
  const Real gamma_over_len = params.gamma / params.penalty_length(fine.h, coarse.H);

  const int n_blocks = static_cast<int>(coarse.blocks.size());
  std::vector<Mat> volume(n_blocks);
  parallel_for(n_blocks, threads, [&](int k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const Mat w = block_modes(bank.blocks[k]);
    const SpMat a_k = window_stiffness(fine, &field, blk.i0, blk.j0, blk.bx, blk.by);
    Mat v = w.transpose() * (a_k * w);
    volume[k] = 0.5 * (v + v.transpose()).eval();
  });

  const int n_edges = static_cast<int>(coarse.edges.size());
  std::vector<EdgeContribution> edge_blocks(n_edges);
  // Mode matrices are reused across the (up to) four edges of each block.
  std::vector<Mat> modes(n_blocks);
  for (int k = 0; k < n_blocks; ++k) modes[k] = block_modes(bank.blocks[k]);
  parallel_for(n_edges, threads, [&](int e) {
    const CoarseEdge& edge = coarse.edges[e];
    const Mat& wp = modes[edge.block_plus];
    const Mat empty;
    const Mat& wm = edge.on_boundary() ? empty : modes[edge.block_minus];
    const EdgeTraces tr = trace_terms(fine, field, coarse, edge, wp, wm);
    edge_blocks[e] = edge_contribution(tr, edge, fine.h, gamma_over_len);
  });

  std::vector<Triplet> t_stiff, t_pen, t_anorm;
  for (int k = 0; k < n_blocks; ++k) {
    append_block(t_stiff, volume[k], sys.offsets[k], sys.offsets[k]);
    append_block(t_anorm, volume[k], sys.offsets[k], sys.offsets[k]);
  }
  for (int e = 0; e < n_edges; ++e) {
    const CoarseEdge& edge = coarse.edges[e];
    const int op = sys.offsets[edge.block_plus];
    const int dp = bank.blocks[edge.block_plus].dof_count();
    const EdgeContribution& eb = edge_blocks[e];
    if (edge.on_boundary()) {
      append_block(t_stiff, eb.cons + eb.pen, op, op);
      append_block(t_pen, eb.pen, op, op);
      append_block(t_anorm, eb.pen, op, op);
    } else {
      const int om = sys.offsets[edge.block_minus];
      const int dm = bank.blocks[edge.block_minus].dof_count();
      const Mat total = eb.cons + eb.pen;
      append_block(t_stiff, total.topLeftCorner(dp, dp), op, op);
      append_block(t_stiff, total.topRightCorner(dp, dm), op, om);
      append_block(t_stiff, total.bottomLeftCorner(dm, dp), om, op);
      append_block(t_stiff, total.bottomRightCorner(dm, dm), om, om);
      append_block(t_pen, eb.pen.topLeftCorner(dp, dp), op, op);
      append_block(t_pen, eb.pen.topRightCorner(dp, dm), op, om);
      append_block(t_pen, eb.pen.bottomLeftCorner(dm, dp), om, op);
      append_block(t_pen, eb.pen.bottomRightCorner(dm, dm), om, om);
      append_block(t_anorm, eb.pen.topLeftCorner(dp, dp), op, op);
      append_block(t_anorm, eb.pen.topRightCorner(dp, dm), op, om);
      append_block(t_anorm, eb.pen.bottomLeftCorner(dm, dp), om, op);
      append_block(t_anorm, eb.pen.bottomRightCorner(dm, dm), om, om);
    }
  }

  sys.stiffness.resize(n, n);
  sys.stiffness.setFromTriplets(t_stiff.begin(), t_stiff.end());
  sys.penalty.resize(n, n);
  sys.penalty.setFromTriplets(t_pen.begin(), t_pen.end());
  sys.anorm.resize(n, n);
  sys.anorm.setFromTriplets(t_anorm.begin(), t_anorm.end());
  return sys;
}

void assemble_mass(DGSystem& system, const LocalBasisBank& bank, const FineMesh& fine,
                   const CoarseMesh& coarse) {
  const int n_blocks = static_cast<int>(coarse.blocks.size());
  system.mass_blocks.resize(n_blocks);
  system.mass_llt.resize(n_blocks);
  for (int k = 0; k < n_blocks; ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const Mat w = block_modes(bank.blocks[k]);
    const SpMat m_k = window_mass(fine, blk.i0, blk.j0, blk.bx, blk.by);
    Mat mb = w.transpose() * (m_k * w);
    mb = 0.5 * (mb + mb.transpose()).eval();
    system.mass_llt[k].compute(mb);
    if (system.mass_llt[k].info() != Eigen::Success)
      throw InternalError("mass block not SPD on block " + std::to_string(k));
    system.mass_blocks[k] = std::move(mb);
  }
}

Vec assemble_load(const DGSystem& system, const LocalBasisBank& bank, const FineMesh& fine,
                  const CoarseMesh& coarse, const Vec& source_nodal_full) {
  Vec load(system.total_dofs());
  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const Mat w = block_modes(bank.blocks[k]);
    const SpMat m_k = window_mass(fine, blk.i0, blk.j0, blk.bx, blk.by);
    const Vec local = gather_nodes(source_nodal_full, blk.local_nodes);
    load.segment(system.offsets[k], bank.blocks[k].dof_count()) = w.transpose() * (m_k * local);
  }
  return load;
}

CoarseState l2_project(const Vec& nodal_full, const DGSystem& system, const LocalBasisBank& bank,
                       const FineMesh& fine, const CoarseMesh& coarse) {
  if (system.mass_blocks.empty()) throw InternalError("mass not assembled");
  CoarseState st;
  st.coeffs = assemble_load(system, bank, fine, coarse, nodal_full);
  system.solve_mass_inplace(st.coeffs);
  return st;
}

CoercivityReport verify_coercivity_continuity(const DGSystem& system, int n_samples,
                                              std::uint64_t seed) {
  CoercivityReport rep;
  rep.samples = n_samples;
  rep.min_coercivity = std::numeric_limits<Real>::infinity();
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal(0.0, 1.0);
  const int n = system.total_dofs();

  auto draw = [&] {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  Vec u = draw();
  for (int s = 0; s < n_samples; ++s) {
    const Vec v = draw();
    const Real vnorm2 = v.dot(system.anorm * v);
    const Real unorm2 = u.dot(system.anorm * u);
    const Real svv = v.dot(system.stiffness * v);
    const Real suv = u.dot(system.stiffness * v);
    if (vnorm2 > 0) {
      rep.min_coercivity = std::min(rep.min_coercivity, svv / vnorm2);
      rep.max_continuity = std::max(rep.max_continuity, std::abs(svv) / vnorm2);
    }
    if (vnorm2 > 0 && unorm2 > 0)
      rep.max_continuity = std::max(rep.max_continuity, std::abs(suv) / std::sqrt(unorm2 * vnorm2));
    u = v;
  }
  return rep;
}

namespace {

/// Boundary-flux quadratic form 2h * int_{dK} (a grad(v).n)^2 over the
/// block's local nodes, as triplets.
std::vector<Triplet> flux_form_triplets(const FineMesh& fine, const CoefficientField& field,
                                        const CoarseBlock& blk) {
  std::vector<Triplet> tr;
  const Real h = fine.h;

  // One sub-edge contribution: rows r0, r1 are linear functionals of the
  // corner values; accumulate 2h * [r0;r1]^T Mseg [r0;r1].
  auto add_side = [&](int cell, int axis, Real sign) {
    const CellCorners c = cell_corners_local(fine, blk, cell);
    const Real factor = field.at(cell) * sign / h;
    // endpoint functionals: pairs (node, weight)
    std::array<std::pair<int, Real>, 2> r0, r1;
    if (axis == 0) {
      r0 = {{{c.l10, factor}, {c.l00, -factor}}};
      r1 = {{{c.l11, factor}, {c.l01, -factor}}};
    } else {
      r0 = {{{c.l01, factor}, {c.l00, -factor}}};
      r1 = {{{c.l11, factor}, {c.l10, -factor}}};
    }
    const Real w_diag = 2.0 * h * h / 3.0;  // 2h * h/3
    const Real w_off = 2.0 * h * h / 6.0;
    for (const auto& [ni, wi] : r0)
      for (const auto& [nj, wj] : r0) tr.emplace_back(ni, nj, w_diag * wi * wj);
    for (const auto& [ni, wi] : r1)
      for (const auto& [nj, wj] : r1) tr.emplace_back(ni, nj, w_diag * wi * wj);
    for (const auto& [ni, wi] : r0)
      for (const auto& [nj, wj] : r1) {
        tr.emplace_back(ni, nj, w_off * wi * wj);
        tr.emplace_back(nj, ni, w_off * wi * wj);
      }
  };

  for (int ci = 0; ci < blk.bx; ++ci) {
    add_side(fine.cell_id(blk.i0 + ci, blk.j0), 1, -1.0);
    add_side(fine.cell_id(blk.i0 + ci, blk.j0 + blk.by - 1), 1, +1.0);
  }
  for (int cj = 0; cj < blk.by; ++cj) {
    add_side(fine.cell_id(blk.i0, blk.j0 + cj), 0, -1.0);
    add_side(fine.cell_id(blk.i0 + blk.bx - 1, blk.j0 + cj), 0, +1.0);
  }
  return tr;
}

/// Candidate sample blocks for the trace pencil: the flux form is dominated
/// by the coefficient on boundary-adjacent cells, so pick the block with the
/// largest boundary coefficient, the strongest internal contrast, and block 0.
std::vector<int> trace_sample_blocks(const CoarseMesh& coarse, const CoefficientField& field) {
  int by_contrast = 0, by_boundary = 0;
  Real best_contrast = -1, best_boundary = -1;
  for (const CoarseBlock& blk : coarse.blocks) {
    Real lo = std::numeric_limits<Real>::infinity(), hi = 0;
    for (int c : blk.cells) {
      lo = std::min(lo, field.at(c));
      hi = std::max(hi, field.at(c));
    }
    if (hi / lo > best_contrast + 1e-15) {
      best_contrast = hi / lo;
      by_contrast = blk.id;
    }
    Real bnd = 0;
    for (int ci = 0; ci < blk.bx; ++ci) {
      bnd = std::max(bnd, field.at(blk.cells[ci]));
      bnd = std::max(bnd, field.at(blk.cells[(blk.by - 1) * blk.bx + ci]));
    }
    for (int cj = 0; cj < blk.by; ++cj) {
      bnd = std::max(bnd, field.at(blk.cells[cj * blk.bx]));
      bnd = std::max(bnd, field.at(blk.cells[cj * blk.bx + blk.bx - 1]));
    }
    if (bnd > best_boundary + 1e-15) {
      best_boundary = bnd;
      by_boundary = blk.id;
    }
  }
  std::vector<int> picks{by_boundary};
  if (by_contrast != by_boundary) picks.push_back(by_contrast);
  if (by_boundary != 0 && by_contrast != 0) picks.push_back(0);
  return picks;
}

}  // namespace

std::pair<Mat, Mat> trace_pencil_dense(const FineMesh& fine, const CoefficientField& field,
                                       const CoarseBlock& block) {
  const int n = block.local_node_count();
  const auto tr = flux_form_triplets(fine, field, block);
  SpMat f(n, n);
  f.setFromTriplets(tr.begin(), tr.end());
  const SpMat e = window_stiffness(fine, &field, block.i0, block.j0, block.bx, block.by);
  return {Mat(f), Mat(field.a1 * e)};
}

namespace {

std::pair<Real, bool> trace_block_sigma(const FineMesh& fine, const CoefficientField& field,
                                        const CoarseBlock& blk, int max_iters, Real tol) {
  const int n = blk.local_node_count();
  // Pin local node 0 to remove the constant kernel of both forms.
  auto reduce = [n](const std::vector<Triplet>& tr) {
    std::vector<Triplet> out;
    out.reserve(tr.size());
    for (const auto& t : tr)
      if (t.row() > 0 && t.col() > 0) out.emplace_back(t.row() - 1, t.col() - 1, t.value());
    SpMat m(n - 1, n - 1);
    m.setFromTriplets(out.begin(), out.end());
    return m;
  };

  const SpMat fr = reduce(flux_form_triplets(fine, field, blk));
  std::vector<Triplet> et;
  {
    const SpMat e = window_stiffness(fine, &field, blk.i0, blk.j0, blk.bx, blk.by);
    for (int k = 0; k < e.outerSize(); ++k)
      for (SpMat::InnerIterator it(e, k); it; ++it)
        et.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        field.a1 * it.value());
  }
  const SpMat er = reduce(et);

  Eigen::SimplicialLLT<SpMat> llt(er);
  if (llt.info() != Eigen::Success) throw InternalError("trace pencil energy form not SPD");

  struct PencilSystem {
    const SpMat* flux;
    const SpMat* energy;
    const Eigen::SimplicialLLT<SpMat>* llt;
    Eigen::Index dim() const { return flux->rows(); }
    Vec apply_stiffness(const Vec& x) const { return *flux * x; }
    Vec apply_mass(const Vec& x) const { return *energy * x; }
    void solve_mass_inplace(Vec& x) const { x = llt->solve(x).eval(); }
  };
  return spectral_lambda_max(PencilSystem{&fr, &er, &llt}, max_iters, tol);
}

}  // namespace

TraceConstantEstimate estimate_trace_constant(const FineMesh& fine, const CoarseMesh& coarse,
                                              const CoefficientField& field, int max_iters,
                                              Real tol) {
  TraceConstantEstimate est;
  est.converged = true;
  for (int id : trace_sample_blocks(coarse, field)) {
    const auto [sigma, ok] = trace_block_sigma(fine, field, coarse.blocks[id], max_iters, tol);
    if (sigma > est.raw) {
      est.raw = sigma;
      est.block_id = id;
      est.converged = ok;
    }
  }
  if (est.converged) {
    est.safe = 1.1 * est.raw;
  } else {
    std::cerr << "warning: trace-constant pencil iteration did not converge; "
                 "using conservative fallback\n";
    est.safe = 2.0 * est.raw;
  }
  return est;
}

}  // namespace gmswave
