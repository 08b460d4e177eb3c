#ifndef GMSWAVE_IPDG_HPP
#define GMSWAVE_IPDG_HPP

#include "gmswave/fem.hpp"
#include "gmswave/media.hpp"
#include "gmswave/mesh.hpp"
#include "gmswave/msbasis.hpp"
#include "gmswave/types.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <vector>

namespace gmswave {

struct DGParams {
  Real gamma = 2.0;          ///< penalty parameter
  Real lambda_trace = 0;     ///< trace-inequality constant estimate (reporting)
  bool penalty_scale_H = false;  ///< experimental: gamma/H instead of gamma/h

  Real penalty_length(Real h, Real H) const { return penalty_scale_H ? H : h; }
};

/// Coefficients over all selected modes, block-major, at a time stamp.
struct CoarseState {
  Vec coeffs;
  Real t = 0;
};

/// Coarse IPDG system: stiffness over the multiscale space, block-diagonal
/// mass with per-block factorizations, and the split penalty/energy Grams
/// used by the verifiers.
struct DGSystem {
  SpMat stiffness;  ///< a_DG
  SpMat penalty;    ///< penalty part alone (a-weighted, gamma/len scaled)
  SpMat anorm;      ///< volume energy + penalty: Gram of the a-norm
  std::vector<Mat> mass_blocks;
  std::vector<Eigen::LLT<Mat>> mass_llt;
  std::vector<int> offsets;  ///< block dof offsets, size blocks+1
  DGParams params;

  int total_dofs() const { return offsets.empty() ? 0 : offsets.back(); }
  int block_count() const { return static_cast<int>(mass_blocks.size()); }
  void solve_mass_inplace(Vec& x) const;
  Vec apply_mass(const Vec& x) const;
};

/// Concatenated [boundary | interior] mode matrix of one block.
Mat block_modes(const BlockBasis& bb);

/// Per-edge trace data: nodal traces of every mode along the edge and the
/// normal flux a grad(u).n at both endpoints of every fine sub-edge, with the
/// K+ -> K- normal. minus-side matrices are empty on boundary edges.
struct EdgeTraces {
  Mat trace_plus, trace_minus;  ///< (B+1) x d_side
  Mat flux_plus, flux_minus;    ///< (2B) x d_side
  Vec a_penalty;                ///< B, harmonic-mean coefficient per sub-edge
};
EdgeTraces trace_terms(const FineMesh& fine, const CoefficientField& field, const CoarseMesh& coarse,
                       const CoarseEdge& edge, const Mat& modes_plus, const Mat& modes_minus);

/// Average and jump of per-mode values sampled on an edge, following the
/// stored orientation (one-sided on boundary edges).
Mat edge_average(const CoarseEdge& edge, const Mat& value_plus, const Mat& value_minus);
Mat edge_jump(const CoarseEdge& edge, const Mat& value_plus, const Mat& value_minus);

/// Assembles the coarse stiffness (volume + consistency + symmetry + penalty)
/// plus the penalty-only and a-norm Grams.
DGSystem assemble_adg(const LocalBasisBank& bank, const FineMesh& fine, const CoarseMesh& coarse,
                      const CoefficientField& field, const DGParams& params, int threads = 1);

/// Per-block dense mass blocks and their factorizations.
void assemble_mass(DGSystem& system, const LocalBasisBank& bank, const FineMesh& fine,
                   const CoarseMesh& coarse);

/// L2 pairings of a nodal source against every mode (block-major).
Vec assemble_load(const DGSystem& system, const LocalBasisBank& bank, const FineMesh& fine,
                  const CoarseMesh& coarse, const Vec& source_nodal_full);

/// Blockwise L2 projection of a full-grid nodal function into the bank span.
CoarseState l2_project(const Vec& nodal_full, const DGSystem& system, const LocalBasisBank& bank,
                       const FineMesh& fine, const CoarseMesh& coarse);

/// Ratio audit over random coefficient vectors:
/// coercivity a_DG(v,v)/|v|_a^2 and continuity |a_DG(u,v)|/(|u|_a |v|_a).
struct CoercivityReport {
  Real min_coercivity = 0;
  Real max_continuity = 0;
  int samples = 0;
  bool coercivity_ok() const { return min_coercivity >= 0.5; }
  bool continuity_ok() const { return max_continuity <= 2.0; }
};
CoercivityReport verify_coercivity_continuity(const DGSystem& system, int n_samples,
                                              std::uint64_t seed);

/// Largest ratio of the boundary-flux form 2h*int_{dK}(a grad(v).n)^2 against
/// a1*int_K a|grad v|^2, maximized on the sample block with the strongest
/// local contrast. safe = 1.1x raw (2x on non-convergence).
struct TraceConstantEstimate {
  Real raw = 0;
  Real safe = 0;
  bool converged = false;
  int block_id = -1;
};
TraceConstantEstimate estimate_trace_constant(const FineMesh& fine, const CoarseMesh& coarse,
                                              const CoefficientField& field, int max_iters = 400,
                                              Real tol = 1e-10);

/// Dense quadratic forms of the trace pencil on one block (test/verifier use).
std::pair<Mat, Mat> trace_pencil_dense(const FineMesh& fine, const CoefficientField& field,
                                       const CoarseBlock& block);

}  // namespace gmswave

#endif
