#include "gmswave/harness.hpp"
#include "gmswave/parallel.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace gmswave {

namespace {

std::string num(Real v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

VerifierResult check(const std::string& name, bool pass, const std::string& detail) {
  return {name, pass, detail};
}

/// dof -> (block, local column)
std::pair<int, int> locate_dof(const LocalBasisBank& bank, int dof) {
  int lo = 0, hi = static_cast<int>(bank.blocks.size());
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (bank.offsets[mid] <= dof) lo = mid;
    else hi = mid;
  }
  return {lo, dof - bank.offsets[lo]};
}

/// Independent entrywise evaluation of a_DG(phi_i, phi_j): volume term via the
/// local stiffness, edge terms via trace_terms sampled with 2-point Gauss.
Real adg_entry(const Problem& prob, const LocalBasisBank& bank, const DGParams& params, int dof_i,
               int dof_j) {
  const auto [bi, ci] = locate_dof(bank, dof_i);
  const auto [bj, cj] = locate_dof(bank, dof_j);
  const Mat wi = block_modes(bank.blocks[bi]).col(ci);
  const Mat wj = block_modes(bank.blocks[bj]).col(cj);

  Real acc = 0;
  if (bi == bj) {
    const CoarseBlock& blk = prob.coarse.blocks[bi];
    const SpMat a_k = window_stiffness(prob.fine, &prob.field, blk.i0, blk.j0, blk.bx, blk.by);
    acc += (wi.col(0).transpose() * (a_k * wj.col(0)))(0);
  }

  const Real gauss = 1.0 / std::sqrt(3.0);
  const Real xi[2] = {0.5 * (1.0 - gauss), 0.5 * (1.0 + gauss)};
  const Real h = prob.fine.h;
  const Real coef = params.gamma / params.penalty_length(h, prob.coarse.H);

  for (const CoarseEdge& edge : prob.coarse.edges) {
    const bool i_plus = edge.block_plus == bi, i_minus = !edge.on_boundary() && edge.block_minus == bi;
    const bool j_plus = edge.block_plus == bj, j_minus = !edge.on_boundary() && edge.block_minus == bj;
    if (!(i_plus || i_minus) || !(j_plus || j_minus)) continue;

    const Mat& wp = block_modes(bank.blocks[edge.block_plus]);
    Mat wm;
    if (!edge.on_boundary()) wm = block_modes(bank.blocks[edge.block_minus]);
    const EdgeTraces tr = trace_terms(prob.fine, prob.field, prob.coarse, edge, wp, wm);

    // trace/flux of one dof on this edge, as linear values per sub-edge
    auto trace_at = [&](bool plus, int col, int node) {
      return plus ? tr.trace_plus(node, col) : tr.trace_minus(node, col);
    };
    auto flux_at = [&](bool plus, int col, int row) {
      return plus ? tr.flux_plus(row, col) : tr.flux_minus(row, col);
    };

    const int col_of_i = ci;
    const int col_of_j = cj;

    for (int s = 0; s < edge.sub_count(); ++s) {
      for (Real x : xi) {
        auto jump = [&](bool plus, bool minus, int col) {
          Real v = 0;
          if (plus) v += (1 - x) * trace_at(true, col, s) + x * trace_at(true, col, s + 1);
          if (minus) v -= (1 - x) * trace_at(false, col, s) + x * trace_at(false, col, s + 1);
          return v;
        };
        auto avg_flux = [&](bool plus, bool minus, int col) {
          Real v = 0;
          const Real w = edge.on_boundary() ? 1.0 : 0.5;
          if (plus) v += w * ((1 - x) * flux_at(true, col, 2 * s) + x * flux_at(true, col, 2 * s + 1));
          if (minus)
            v += w * ((1 - x) * flux_at(false, col, 2 * s) + x * flux_at(false, col, 2 * s + 1));
          return v;
        };
        const Real jump_i = jump(i_plus, i_minus, col_of_i);
        const Real jump_j = jump(j_plus, j_minus, col_of_j);
        const Real favg_i = avg_flux(i_plus, i_minus, col_of_i);
        const Real favg_j = avg_flux(j_plus, j_minus, col_of_j);
        const Real w_gauss = 0.5 * h;
        acc += w_gauss * (-favg_i * jump_j - favg_j * jump_i + coef * tr.a_penalty[s] * jump_i * jump_j);
      }
    }
  }
  return acc;
}

}  // namespace

std::vector<VerifierResult> verify_mesh(const Problem& prob) {
  std::vector<VerifierResult> out;
  const FineMesh& fine = prob.fine;
  const CoarseMesh& coarse = prob.coarse;

  std::vector<int> owner(fine.cell_count(), 0);
  for (const CoarseBlock& blk : coarse.blocks)
    for (int c : blk.cells) owner[c] += 1;
  const bool partition = std::all_of(owner.begin(), owner.end(), [](int v) { return v == 1; });
  out.push_back(check("mesh.partition", partition, "every fine cell in exactly one block"));

  bool counts = true;
  for (const CoarseBlock& blk : coarse.blocks) {
    if (blk.boundary_count() != 2 * (blk.bx + blk.by)) counts = false;
    if (blk.interior_count() != (blk.bx - 1) * (blk.by - 1)) counts = false;
  }
  out.push_back(check("mesh.block_counts", counts, "boundary 4(H/h), interior (H/h-1)^2"));

  bool edges_ok = true;
  std::set<std::pair<int, int>> seen;
  int interior_edges = 0;
  for (const CoarseEdge& edge : coarse.edges) {
    if (!edge.on_boundary()) {
      ++interior_edges;
      const CoarseBlock& kp = coarse.blocks[edge.block_plus];
      const CoarseBlock& km = coarse.blocks[edge.block_minus];
      if (edge.block_plus >= edge.block_minus) edges_ok = false;
      for (size_t t = 0; t < edge.nodes_plus_local.size(); ++t)
        if (kp.local_nodes[edge.nodes_plus_local[t]] != km.local_nodes[edge.nodes_minus_local[t]])
          edges_ok = false;
      for (const SubEdge& s : edge.subs)
        if (!seen.emplace(std::min(s.n0, s.n1), std::max(s.n0, s.n1)).second) edges_ok = false;
    }
  }
  const int expect_interior = (coarse.NX - 1) * coarse.NY + coarse.NX * (coarse.NY - 1);
  if (interior_edges != expect_interior) edges_ok = false;
  out.push_back(check("mesh.edges", edges_ok,
                      "interior edges " + std::to_string(interior_edges) + ", orientation K+ -> K-"));
  return out;
}

std::vector<VerifierResult> verify_bank(const Problem& prob, const LocalBasisBank& bank) {
  std::vector<VerifierResult> out;
  const FineMesh& fine = prob.fine;
  const CoarseMesh& coarse = prob.coarse;
  const CoefficientField& field = prob.field;

  std::optional<OversampleMap> omap;
  if (bank.oversample_cells >= 0)
    omap = build_oversample_map(fine, coarse, bank.oversample_cells);

  Real worst_pou = 0, worst_harm = 0, worst_resid_b = 0, worst_resid_i = 0;
  Real worst_orth_b = 0, worst_orth_i = 0, worst_cross = 0, worst_mu1 = 0, worst_const = 0;
  bool ordered = true, monotone = true;

  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const BlockBasis& bb = bank.blocks[k];
    const SpMat a_k = window_stiffness(fine, &field, blk.i0, blk.j0, blk.bx, blk.by);
    const SpMat m_k = window_mass(fine, blk.i0, blk.j0, blk.bx, blk.by);
    const Real a_norm = std::sqrt(Real(Mat(a_k).squaredNorm()));

    const BoundarySnapshotSet snaps =
        omap ? harmonic_extensions_oversampled(fine, field, blk, omap->blocks[k])
             : harmonic_extensions(fine, field, blk);

    // partition of unity and harmonicity of the snapshot set
    const Vec row_sums = snaps.snapshots.rowwise().sum();
    worst_pou = std::max(worst_pou, (row_sums.array() - 1.0).abs().maxCoeff());
    const Mat aw = a_k * snaps.snapshots;
    for (int c = 0; c < aw.cols(); ++c) {
      Real interior_resid = 0;
      for (int i : blk.interior_local) interior_resid += aw(i, c) * aw(i, c);
      worst_harm = std::max(worst_harm, std::sqrt(interior_resid) /
                                            (a_norm * snaps.snapshots.col(c).norm()));
    }

    // fresh pencils and their residuals
    const BoundarySpectrum bs = boundary_spectral(snaps, fine, field, blk, coarse.H);
    const Real bs_norm = bs.pencil_a.norm();
    for (int c = 0; c < bs.pencil_vecs.cols(); ++c) {
      const Vec r = bs.pencil_a * bs.pencil_vecs.col(c) -
                    (bs.mu[c] / coarse.H) * (bs.pencil_b * bs.pencil_vecs.col(c));
      worst_resid_b = std::max(worst_resid_b, r.norm() / (bs_norm * bs.pencil_vecs.col(c).norm()));
    }
    const InteriorSpectrum is = interior_spectral(fine, field, blk, coarse.H, bb.m);
    if (bb.m > 0) {
      const Real is_norm = is.pencil_a.norm();
      for (int c = 0; c < is.pencil_vecs.cols(); ++c) {
        const Vec r = is.pencil_a * is.pencil_vecs.col(c) -
                      (is.lambda[c] / (coarse.H * coarse.H)) * (is.pencil_b * is.pencil_vecs.col(c));
        worst_resid_i = std::max(worst_resid_i, r.norm() / (is_norm * is.pencil_vecs.col(c).norm()));
      }
    }

    // stored-mode audits (these see tampering and serialization faults)
    const SpMat b1 = boundary_trace_mass(blk.boundary_count(), fine.h);
    Mat traces(blk.boundary_count(), bb.p);
    for (int b = 0; b < blk.boundary_count(); ++b)
      traces.row(b) = bb.boundary_modes.row(blk.boundary_local[b]);
    worst_orth_b = std::max(
        worst_orth_b,
        (traces.transpose() * (b1 * traces) - Mat::Identity(bb.p, bb.p)).cwiseAbs().maxCoeff());
    if (bb.m > 0) {
      const Mat z = bb.interior_modes;
      worst_orth_i = std::max(
          worst_orth_i,
          (z.transpose() * (m_k * z) - Mat::Identity(bb.m, bb.m)).cwiseAbs().maxCoeff());
      const Mat cross = bb.boundary_modes.transpose() * (a_k * z);
      for (int i = 0; i < bb.p; ++i) {
        const Real wi = std::sqrt(
            std::max(bb.boundary_modes.col(i).dot(a_k * bb.boundary_modes.col(i)), Real(0)));
        for (int j = 0; j < bb.m; ++j) {
          const Real zj = std::sqrt(z.col(j).dot(a_k * z.col(j)));
          if (wi > 0 && zj > 0)
            worst_cross = std::max(worst_cross, std::abs(cross(i, j)) / (wi * zj));
        }
      }
    }

    for (int i = 1; i < bb.mu.size(); ++i)
      if (bb.mu[i] < bb.mu[i - 1] - 1e-12) ordered = false;
    if (bb.mu.size() >= 2 && bb.mu[1] > 0) worst_mu1 = std::max(worst_mu1, bb.mu[0] / bb.mu[1]);
    const Vec first = bb.boundary_modes.col(0);
    const Real mean = first.mean();
    if (std::abs(mean) > 0)
      worst_const = std::max(worst_const, (first.array() - mean).abs().maxCoeff() / std::abs(mean));

    if (select_by_energy(bb.mu, 0.80) < select_by_energy(bb.mu, 0.75)) monotone = false;
  }

  out.push_back(check("bank.partition_of_unity", worst_pou <= 1e-10, "max |sum w_i - 1| = " + num(worst_pou)));
  out.push_back(check("bank.harmonicity", worst_harm <= 1e-10, "max interior residual = " + num(worst_harm)));
  out.push_back(check("bank.boundary_residual", worst_resid_b <= 1e-9, "max = " + num(worst_resid_b)));
  out.push_back(check("bank.interior_residual", worst_resid_i <= 1e-9, "max = " + num(worst_resid_i)));
  out.push_back(check("bank.boundary_orthonormal", worst_orth_b <= 1e-9, "max defect = " + num(worst_orth_b)));
  out.push_back(check("bank.interior_orthonormal", worst_orth_i <= 1e-9, "max defect = " + num(worst_orth_i)));
  out.push_back(check("bank.cross_orthogonality", worst_cross <= 1e-9, "max = " + num(worst_cross)));
  out.push_back(check("bank.mu_ordering", ordered && worst_mu1 <= 1e-8,
                      "mu ascending, mu1/mu2 = " + num(worst_mu1)));
  out.push_back(check("bank.first_mode_constant", worst_const <= 1e-6,
                      "max deviation = " + num(worst_const)));
  out.push_back(check("bank.selection_monotone", monotone, "p(0.80) >= p(0.75) on every block"));
  return out;
}

std::vector<VerifierResult> verify_system(const Problem& prob, const LocalBasisBank& bank,
                                          const DGSystem& system, std::uint64_t seed) {
  std::vector<VerifierResult> out;

  SparseOperator wrap;
  wrap.matrix = system.stiffness;
  const Real defect = wrap.symmetry_defect();
  out.push_back(check("system.symmetry", defect <= 1e-12, "relative defect = " + num(defect)));

  // couplings only between identical or edge-adjacent blocks
  std::set<std::pair<int, int>> adjacent;
  for (const CoarseEdge& edge : prob.coarse.edges)
    if (!edge.on_boundary()) {
      adjacent.emplace(edge.block_plus, edge.block_minus);
      adjacent.emplace(edge.block_minus, edge.block_plus);
    }
  bool sparsity = true;
  for (int col = 0; col < system.stiffness.outerSize(); ++col) {
    const int bk_col = locate_dof(bank, col).first;
    for (SpMat::InnerIterator it(system.stiffness, col); it; ++it) {
      const int bk_row = locate_dof(bank, static_cast<int>(it.row())).first;
      if (bk_row != bk_col && !adjacent.count({bk_row, bk_col})) sparsity = false;
    }
  }
  out.push_back(check("system.sparsity", sparsity, "couplings only across shared coarse edges"));

  bool mass_ok = true;
  Real mass_sym = 0;
  for (const Mat& mb : system.mass_blocks) {
    mass_sym = std::max(mass_sym, (mb - mb.transpose()).cwiseAbs().maxCoeff());
    Eigen::LLT<Mat> llt(mb);
    if (llt.info() != Eigen::Success) mass_ok = false;
  }
  out.push_back(check("system.mass_blocks", mass_ok && mass_sym <= 1e-12,
                      "SPD dense blocks, cross-block entries structurally zero"));

  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal(0.0, 1.0);
  const int n = system.total_dofs();
  Real pen_min = 0;
  for (int s = 0; s < 20; ++s) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    pen_min = std::min(pen_min, v.dot(system.penalty * v) / v.squaredNorm());
  }
  out.push_back(check("system.penalty_psd", pen_min >= -1e-12, "min Rayleigh = " + num(pen_min)));

  Real entry_scale = 0;
  for (int k = 0; k < system.stiffness.outerSize(); ++k)
    for (SpMat::InnerIterator it(system.stiffness, k); it; ++it)
      entry_scale = std::max(entry_scale, std::abs(it.value()));
  Real worst_entry = 0;
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int s = 0; s < 100; ++s) {
    const int i = pick(rng), j = pick(rng);
    const Real direct = adg_entry(prob, bank, system.params, i, j);
    const Real assembled = system.stiffness.coeff(i, j);
    worst_entry = std::max(worst_entry, std::abs(direct - assembled));
  }
  out.push_back(check("system.adjoint_consistency", worst_entry <= 1e-12 * std::max(entry_scale, Real(1)),
                      "max |entry - quadrature| = " + num(worst_entry)));
  return out;
}

std::vector<VerifierResult> verify_cfl(const Problem& /*prob*/, const DGSystem& system,
                                       std::uint64_t seed) {
  std::vector<VerifierResult> out;
  CoarseWaveSystem wave(system);
  const auto [lambda, converged] = spectral_lambda_max(wave);
  out.push_back(check("cfl.spectral", converged && lambda > 0, "lambda_max = " + num(lambda)));
  const Real dt_max = 2.0 / std::sqrt(lambda);

  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<Real> normal(0.0, 1.0);
  Vec u0(system.total_dofs());
  for (int i = 0; i < u0.size(); ++i) u0[i] = normal(rng);
  u0.normalize();

  {
    TimeGrid grid;
    grid.dt = 0.9 * dt_max;
    grid.steps = 1000;
    grid.T = grid.dt * static_cast<Real>(grid.steps);
    auto [a, b] = init_states(wave, u0, Vec::Zero(u0.size()), grid.dt);
    Vec u1 = b;
    const Real e0 = leapfrog_energy(wave, u0, u1, grid.dt);
    const auto res = leapfrog_run(wave, u0, u1, grid);
    const Real e1 = leapfrog_energy(wave, res.u_prev, res.u_final, grid.dt);
    const Real drift = std::abs(e1 - e0) / std::abs(e0);
    out.push_back(check("cfl.energy_conservation", drift <= 1e-10,
                        "relative drift over 1000 steps = " + num(drift)));
  }
  {
    TimeGrid grid;
    grid.dt = 1.2 * dt_max;
    grid.steps = 500;
    grid.T = grid.dt * static_cast<Real>(grid.steps);
    LeapfrogOptions opts;
    opts.check_every = 1;
    opts.abort_norm = 1e3 * u0.norm();
    bool blew_up = false;
    std::int64_t at = -1;
    try {
      const auto res = leapfrog_run(wave, u0, u0, grid, {}, opts);
      blew_up = res.aborted;
      at = res.abort_step;
    } catch (const InstabilityError&) {
      blew_up = true;
    }
    out.push_back(check("cfl.instability_detected", blew_up,
                        "norm growth > 1e3 by step " + std::to_string(at)));
  }
  return out;
}

int run_verifiers(const RunConfig& cfg) {
  const Problem prob = setup_problem(cfg);

  LocalBasisBank bank;
  if (!cfg.bank_path.empty()) {
    bank = load_bank(cfg.bank_path);
  } else {
    std::optional<int> over;
    if (cfg.oversample >= 0) over = cfg.oversample;
    bank = build_bank(prob.fine, prob.coarse, prob.field, cfg.theta, cfg.interior_m, over,
                      cfg.resolved_threads());
  }

  const TraceConstantEstimate trace = estimate_trace_constant(prob.fine, prob.coarse, prob.field);
  DGParams params;
  params.gamma = cfg.gamma;
  params.lambda_trace = trace.safe;
  DGSystem system = assemble_adg(bank, prob.fine, prob.coarse, prob.field, params,
                                 cfg.resolved_threads());
  assemble_mass(system, bank, prob.fine, prob.coarse);

  std::vector<VerifierResult> results;
  auto absorb = [&](std::vector<VerifierResult> v) {
    for (auto& r : v) results.push_back(std::move(r));
  };
  absorb(verify_mesh(prob));
  absorb(verify_bank(prob, bank));
  absorb(verify_system(prob, bank, system, cfg.seed));

  // coercivity/continuity at the provable penalty threshold
  const Real gamma_thr = trace.safe * prob.field.a1 / prob.field.a0;
  if (cfg.gamma < gamma_thr)
    std::cout << "note: gamma = " << cfg.gamma << " is below the provable threshold "
              << gamma_thr << " (Lambda a1/a0); ratios below are checked at the threshold\n";
  {
    DGParams thr = params;
    thr.gamma = std::max(cfg.gamma, gamma_thr);
    DGSystem sys_thr = assemble_adg(bank, prob.fine, prob.coarse, prob.field, thr,
                                    cfg.resolved_threads());
    assemble_mass(sys_thr, bank, prob.fine, prob.coarse);
    const CoercivityReport rep = verify_coercivity_continuity(sys_thr, 100, cfg.seed);
    results.push_back(check("system.coercivity", rep.coercivity_ok(),
                            "min ratio = " + num(rep.min_coercivity) + " at gamma = " + num(thr.gamma)));
    results.push_back(check("system.continuity", rep.continuity_ok(),
                            "max ratio = " + num(rep.max_continuity)));
  }
  results.push_back(check("system.trace_constant", trace.raw > 0,
                          "Lambda = " + num(trace.raw) + " (safe " + num(trace.safe) + ")"));

  absorb(verify_cfl(prob, system, cfg.seed));

  int failures = 0;
  for (const VerifierResult& r : results) {
    std::cout << (r.pass ? "[ ok ] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    if (!r.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all verifiers passed" : std::to_string(failures) + " verifier(s) failed")
            << " (" << results.size() << " checks)\n";
  return failures;
}

}  // namespace gmswave
