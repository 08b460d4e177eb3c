#include "gmswave/msbasis.hpp"

#include "gmswave/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace gmswave {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> inverse_index(int n, const std::vector<int>& subset) {
  std::vector<int> inv(n, -1);
  for (size_t k = 0; k < subset.size(); ++k) inv[subset[k]] = static_cast<int>(k);
  return inv;
}

/// Harmonic extension of all boundary hats of a node window.
Mat window_harmonic_hats(const SpMat& stiffness, const std::vector<int>& boundary,
                         const std::vector<int>& interior) {
  const int n_nodes = static_cast<int>(stiffness.rows());
  const int nb = static_cast<int>(boundary.size());
  const int ni = static_cast<int>(interior.size());

  Mat w = Mat::Zero(n_nodes, nb);
  for (int b = 0; b < nb; ++b) w(boundary[b], b) = 1.0;
  if (ni == 0) return w;

  const std::vector<int> int_of = inverse_index(n_nodes, interior);
  std::vector<Triplet> tr;
  Mat rhs = Mat::Zero(ni, nb);
  const std::vector<int> bnd_of = inverse_index(n_nodes, boundary);
  for (int col = 0; col < n_nodes; ++col) {
    for (SpMat::InnerIterator it(stiffness, col); it; ++it) {
      const int ri = int_of[static_cast<int>(it.row())];
      if (ri < 0) continue;
      const int ci = int_of[col];
      if (ci >= 0)
        tr.emplace_back(ri, ci, it.value());
      else
        rhs(ri, bnd_of[col]) -= it.value();
    }
  }
  SpMat a_ii(ni, ni);
  a_ii.setFromTriplets(tr.begin(), tr.end());
  Eigen::SimplicialLLT<SpMat> llt(a_ii);
  if (llt.info() != Eigen::Success) throw InternalError("local harmonic system not SPD");
  const Mat sol = llt.solve(rhs);

  for (int b = 0; b < nb; ++b)
    for (int i = 0; i < ni; ++i) w(interior[i], b) = sol(i, b);
  return w;
}

void fix_mode_signs(Mat& modes, Mat* coeffs, Mat* pencil_vecs) {
  for (int j = 0; j < modes.cols(); ++j) {
    int idx = 0;
    modes.col(j).cwiseAbs().maxCoeff(&idx);
    if (modes(idx, j) < 0) {
      modes.col(j) = -modes.col(j);
      if (coeffs) coeffs->col(j) = -coeffs->col(j);
      if (pencil_vecs) pencil_vecs->col(j) = -pencil_vecs->col(j);
    }
  }
}

Real safe_reciprocal(Real x, Real scale) {
  return x > 1e-14 * scale ? 1.0 / x : 0.0;
}

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("bank file truncated");
  return v;
}
void write_vec(std::ofstream& out, const Vec& v) {
  write_pod<std::int64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}
Vec read_vec(std::ifstream& in) {
  const auto n = read_pod<std::int64_t>(in);
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("bank file truncated");
  return v;
}
void write_mat(std::ofstream& out, const Mat& m) {
  write_pod<std::int64_t>(out, m.rows());
  write_pod<std::int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}
Mat read_mat(std::ifstream& in) {
  const auto r = read_pod<std::int64_t>(in);
  const auto c = read_pod<std::int64_t>(in);
  Mat m(r, c);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw DataError("bank file truncated");
  return m;
}

constexpr char kBankMagic[8] = {'G', 'M', 'S', 'B', 'A', 'N', 'K', '1'};

}  // namespace

SpMat boundary_trace_mass(int n_boundary, Real h) {
  if (n_boundary < 3) throw InternalError("boundary polyline needs at least 3 nodes");
  std::vector<Triplet> tr;
  tr.reserve(static_cast<size_t>(n_boundary) * 3);
  for (int i = 0; i < n_boundary; ++i) {
    const int prev = (i + n_boundary - 1) % n_boundary;
    const int next = (i + 1) % n_boundary;
    tr.emplace_back(i, i, 2.0 * h / 3.0);
    tr.emplace_back(i, prev, h / 6.0);
    tr.emplace_back(i, next, h / 6.0);
  }
  SpMat b(n_boundary, n_boundary);
  b.setFromTriplets(tr.begin(), tr.end());
  return b;
}

BoundarySnapshotSet harmonic_extensions(const FineMesh& fine, const CoefficientField& field,
                                        const CoarseBlock& block) {
  const SpMat a_k = window_stiffness(fine, &field, block.i0, block.j0, block.bx, block.by);
  BoundarySnapshotSet set;
  set.snapshots = window_harmonic_hats(a_k, block.boundary_local, block.interior_local);
  set.traces = Mat::Identity(block.boundary_count(), block.boundary_count());
  return set;
}

BoundarySnapshotSet harmonic_extensions_oversampled(const FineMesh& fine,
                                                    const CoefficientField& field,
                                                    const CoarseBlock& block,
                                                    const OversampleBlock& window) {
  const SpMat a_w = window_stiffness(fine, &field, window.i0, window.j0, window.bx, window.by);
  std::vector<int> interior;
  {
    std::vector<char> is_bnd(window.local_node_count(), 0);
    for (int b : window.boundary_local) is_bnd[b] = 1;
    for (int i = 0; i < window.local_node_count(); ++i)
      if (!is_bnd[i]) interior.push_back(i);
  }
  const Mat w_full = window_harmonic_hats(a_w, window.boundary_local, interior);

  BoundarySnapshotSet set;
  const int n_local = block.local_node_count();
  set.snapshots.resize(n_local, w_full.cols());
  for (int l = 0; l < n_local; ++l) set.snapshots.row(l) = w_full.row(window.restrict_map[l]);
  set.traces.resize(block.boundary_count(), w_full.cols());
  for (int b = 0; b < block.boundary_count(); ++b)
    set.traces.row(b) = set.snapshots.row(block.boundary_local[b]);
  return set;
}

BoundarySpectrum boundary_spectral(const BoundarySnapshotSet& snaps, const FineMesh& fine,
                                   const CoefficientField& field, const CoarseBlock& block, Real H,
                                   Real rank_rel_tol) {
  if (snaps.snapshots.cols() == 0) throw ConfigError("empty snapshot set");

  const SpMat a_k = window_stiffness(fine, &field, block.i0, block.j0, block.bx, block.by);
  const Mat aw = a_k * snaps.snapshots;
  Mat a = snaps.snapshots.transpose() * aw;
  a = 0.5 * (a + a.transpose()).eval();

  const SpMat b1 = boundary_trace_mass(block.boundary_count(), fine.h);
  Mat gram = snaps.traces.transpose() * (b1 * snaps.traces);
  gram = 0.5 * (gram + gram.transpose()).eval();

  const bool plain = snaps.traces.rows() == snaps.traces.cols() &&
                     snaps.traces.isIdentity(0.0);

  BoundarySpectrum out;
  if (plain) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(a, gram,
                                                     Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw InternalError("boundary pencil solve failed");
    out.mu = H * es.eigenvalues();
    out.coeffs = es.eigenvectors();
    out.pencil_a = a;
    out.pencil_b = gram;
    out.pencil_vecs = out.coeffs;
  } else {
    Eigen::SelfAdjointEigenSolver<Mat> gs(gram);
    if (gs.info() != Eigen::Success) throw InternalError("snapshot Gram eigensolve failed");
    const Vec d = gs.eigenvalues();
    const Real dmax = d.maxCoeff();
    std::vector<int> kept;
    for (int k = 0; k < d.size(); ++k)
      if (d[k] > rank_rel_tol * dmax) kept.push_back(k);
    if (kept.empty()) throw InternalError("snapshot Gram has no usable rank");

    Mat q(gram.rows(), static_cast<Eigen::Index>(kept.size()));
    for (size_t k = 0; k < kept.size(); ++k)
      q.col(static_cast<Eigen::Index>(k)) = gs.eigenvectors().col(kept[k]) / std::sqrt(d[kept[k]]);

    Mat a_s = q.transpose() * a * q;
    a_s = 0.5 * (a_s + a_s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(a_s);
    if (es.info() != Eigen::Success) throw InternalError("filtered boundary pencil solve failed");
    out.mu = H * es.eigenvalues();
    out.coeffs = q * es.eigenvectors();
    out.pencil_a = a_s;
    out.pencil_b = Mat::Identity(a_s.rows(), a_s.cols());
    out.pencil_vecs = es.eigenvectors();
  }

  // Zero-mode cleanup: the constant snapshot combination carries no energy.
  if (out.mu.size() >= 2 && std::abs(out.mu[0]) <= 1e-8 * std::max(out.mu[1], Real(0)))
    out.mu[0] = 0;
  for (int i = 0; i < out.mu.size(); ++i)
    if (out.mu[i] < 0 && out.mu[i] > -1e-12 * std::max(out.mu[out.mu.size() - 1], Real(1)))
      out.mu[i] = 0;

  out.modes = snaps.snapshots * out.coeffs;
  fix_mode_signs(out.modes, &out.coeffs, &out.pencil_vecs);
  return out;
}

InteriorSpectrum interior_spectral(const FineMesh& fine, const CoefficientField& field,
                                   const CoarseBlock& block, Real H, int m) {
  const int n0 = block.interior_count();
  if (m < 0) throw ConfigError("interior mode count must be >= 0");
  if (m > n0)
    throw ConfigError("interior mode count " + std::to_string(m) + " exceeds dim V_h^0 = " +
                      std::to_string(n0) + " on block " + std::to_string(block.id));

  InteriorSpectrum out;
  const int n_local = block.local_node_count();
  if (n0 == 0) {
    out.modes = Mat::Zero(n_local, 0);
    return out;
  }

  const SpMat a_k = window_stiffness(fine, &field, block.i0, block.j0, block.bx, block.by);
  const SpMat m_k = window_mass(fine, block.i0, block.j0, block.bx, block.by);
  const std::vector<int> int_of = inverse_index(n_local, block.interior_local);

  Mat a_ii = Mat::Zero(n0, n0), m_ii = Mat::Zero(n0, n0);
  for (int col = 0; col < n_local; ++col) {
    const int ci = int_of[col];
    if (ci < 0) continue;
    for (SpMat::InnerIterator it(a_k, col); it; ++it) {
      const int ri = int_of[static_cast<int>(it.row())];
      if (ri >= 0) a_ii(ri, ci) = it.value();
    }
    for (SpMat::InnerIterator it(m_k, col); it; ++it) {
      const int ri = int_of[static_cast<int>(it.row())];
      if (ri >= 0) m_ii(ri, ci) = it.value();
    }
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(a_ii, m_ii,
                                                   Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw InternalError("interior pencil solve failed");

  const int n_report = std::min(n0, m + 1);
  out.lambda = H * H * es.eigenvalues().head(n_report);
  out.modes = Mat::Zero(n_local, m);
  Mat vecs = es.eigenvectors().leftCols(m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n0; ++i) out.modes(block.interior_local[i], j) = vecs(i, j);
  out.pencil_a = std::move(a_ii);
  out.pencil_b = std::move(m_ii);
  fix_mode_signs(out.modes, nullptr, &vecs);
  out.pencil_vecs = std::move(vecs);
  return out;
}

Real boundary_energy(const Vec& mu) {
  if (mu.size() < 2) return 0;
  const Real scale = std::max(mu.maxCoeff(), Real(1e-300));
  Real e = 0;
  for (int i = 1; i < mu.size(); ++i) e += safe_reciprocal(mu[i], scale);
  return e;
}

int select_by_energy(const Vec& mu, Real theta) {
  if (!(theta > 0) || theta > 1) throw ConfigError("energy fraction must be in (0, 1]");
  if (mu.size() == 0) throw ConfigError("empty spectrum");
  const Real e_total = boundary_energy(mu);
  if (e_total <= 0) return 1;
  const Real scale = std::max(mu.maxCoeff(), Real(1e-300));
  const Real target = theta * e_total;
  Real acc = 0;
  for (int p = 2; p <= mu.size(); ++p) {
    acc += safe_reciprocal(mu[p - 1], scale);
    if (acc >= target * (1.0 - 1e-12)) return p;
  }
  return static_cast<int>(mu.size());
}

void LocalBasisBank::rebuild_offsets() {
  offsets.assign(blocks.size() + 1, 0);
  for (size_t k = 0; k < blocks.size(); ++k) offsets[k + 1] = offsets[k] + blocks[k].dof_count();
}

LocalBasisBank build_bank(const FineMesh& fine, const CoarseMesh& coarse,
                          const CoefficientField& field, Real theta, int m,
                          std::optional<int> oversample_cells, int threads) {
  if (!(theta > 0) || theta > 1) throw ConfigError("energy fraction must be in (0, 1]");
  for (const CoarseBlock& blk : coarse.blocks)
    if (m > blk.interior_count())
      throw ConfigError("interior mode count " + std::to_string(m) + " exceeds dim V_h^0 = " +
                        std::to_string(blk.interior_count()));

  std::optional<OversampleMap> omap;
  if (oversample_cells) omap = build_oversample_map(fine, coarse, *oversample_cells);

  LocalBasisBank bank;
  bank.theta = theta;
  bank.m_interior = m;
  bank.oversample_cells = oversample_cells ? *oversample_cells : -1;
  bank.blocks.resize(coarse.blocks.size());

  const auto t0 = Clock::now();
  parallel_for(static_cast<int>(coarse.blocks.size()), threads, [&](int k) {
    try {
      const CoarseBlock& blk = coarse.blocks[k];
      const BoundarySnapshotSet snaps =
          omap ? harmonic_extensions_oversampled(fine, field, blk, omap->blocks[k])
               : harmonic_extensions(fine, field, blk);
      const BoundarySpectrum bs = boundary_spectral(snaps, fine, field, blk, coarse.H);
      const InteriorSpectrum is = interior_spectral(fine, field, blk, coarse.H, m);

      BlockBasis bb;
      bb.block_id = blk.id;
      bb.p = select_by_energy(bs.mu, theta);
      bb.m = m;
      bb.mu = bs.mu;
      bb.energy_total = boundary_energy(bs.mu);
      bb.lambda = is.lambda;
      bb.boundary_modes = bs.modes.leftCols(bb.p);
      bb.interior_modes = is.modes;
      bank.blocks[k] = std::move(bb);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw InternalError("block " + std::to_string(k) + ": " + e.what());
    }
  });
  bank.t_offline = seconds_since(t0);
  bank.rebuild_offsets();
  return bank;
}

LocalBasisBank slice_bank(const LocalBasisBank& bank, Real theta, int m) {
  LocalBasisBank out;
  out.theta = theta;
  out.m_interior = m;
  out.oversample_cells = bank.oversample_cells;
  out.t_offline = bank.t_offline;
  out.blocks.reserve(bank.blocks.size());
  for (const BlockBasis& bb : bank.blocks) {
    if (m > bb.m)
      throw ConfigError("bank holds only " + std::to_string(bb.m) + " interior modes, need " +
                        std::to_string(m));
    BlockBasis nb;
    nb.block_id = bb.block_id;
    nb.p = select_by_energy(bb.mu, theta);
    if (nb.p > bb.p)
      throw ConfigError("bank holds only " + std::to_string(bb.p) +
                        " boundary modes, selection needs " + std::to_string(nb.p));
    nb.m = m;
    nb.mu = bb.mu;
    nb.energy_total = bb.energy_total;
    nb.lambda = bb.lambda.head(std::min<Eigen::Index>(bb.lambda.size(), m + 1));
    nb.boundary_modes = bb.boundary_modes.leftCols(nb.p);
    nb.interior_modes = bb.interior_modes.leftCols(m);
    out.blocks.push_back(std::move(nb));
  }
  out.rebuild_offsets();
  return out;
}

void save_bank(const LocalBasisBank& bank, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write bank " + path);
  out.write(kBankMagic, sizeof(kBankMagic));
  write_pod<std::int32_t>(out, 1);
  write_pod<std::int32_t>(out, static_cast<std::int32_t>(bank.blocks.size()));
  write_pod<double>(out, bank.theta);
  write_pod<std::int32_t>(out, bank.m_interior);
  write_pod<std::int32_t>(out, bank.oversample_cells);
  write_pod<double>(out, bank.t_offline);
  for (const BlockBasis& bb : bank.blocks) {
    write_pod<std::int32_t>(out, bb.block_id);
    write_pod<std::int32_t>(out, bb.p);
    write_pod<std::int32_t>(out, bb.m);
    write_pod<double>(out, bb.energy_total);
    write_vec(out, bb.mu);
    write_vec(out, bb.lambda);
    write_mat(out, bb.boundary_modes);
    write_mat(out, bb.interior_modes);
  }
  if (!out) throw DataError("write failed for bank " + path);

  std::ofstream man(path + ".manifest");
  if (!man) throw DataError("cannot write bank manifest " + path + ".manifest");
  man.precision(17);
  man << "gmswave-bank v1\n"
      << "blocks " << bank.blocks.size() << "\n"
      << "theta " << bank.theta << "\n"
      << "interior " << bank.m_interior << "\n"
      << "oversample " << bank.oversample_cells << "\n"
      << "t_offline " << bank.t_offline << "\n";
  for (const BlockBasis& bb : bank.blocks) {
    man << "block " << bb.block_id << " p " << bb.p << " m " << bb.m << " energy "
        << bb.energy_total;
    if (bb.p < bb.mu.size()) man << " mu_next " << bb.mu[bb.p];
    if (bb.m < bb.lambda.size()) man << " lambda_next " << bb.lambda[bb.m];
    man << "\n";
  }
}

LocalBasisBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open bank " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBankMagic, sizeof(magic)) != 0)
    throw DataError("bad bank magic in " + path);
  const auto version = read_pod<std::int32_t>(in);
  if (version != 1) throw DataError("unsupported bank version " + std::to_string(version));

  LocalBasisBank bank;
  const auto n_blocks = read_pod<std::int32_t>(in);
  bank.theta = read_pod<double>(in);
  bank.m_interior = read_pod<std::int32_t>(in);
  bank.oversample_cells = read_pod<std::int32_t>(in);
  bank.t_offline = read_pod<double>(in);
  bank.blocks.resize(n_blocks);
  for (auto& bb : bank.blocks) {
    bb.block_id = read_pod<std::int32_t>(in);
    bb.p = read_pod<std::int32_t>(in);
    bb.m = read_pod<std::int32_t>(in);
    bb.energy_total = read_pod<double>(in);
    bb.mu = read_vec(in);
    bb.lambda = read_vec(in);
    bb.boundary_modes = read_mat(in);
    bb.interior_modes = read_mat(in);
  }
  bank.rebuild_offsets();
  return bank;
}

}  // namespace gmswave
