#ifndef GMSWAVE_MSBASIS_HPP
#define GMSWAVE_MSBASIS_HPP

#include "gmswave/fem.hpp"
#include "gmswave/media.hpp"
#include "gmswave/mesh.hpp"
#include "gmswave/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gmswave {

/// Per-block boundary snapshots: columns are coefficient-harmonic extensions
/// of boundary data, stored over the block's row-major local nodes.
struct BoundarySnapshotSet {
  Mat snapshots;  ///< local_nodes x n_snap
  Mat traces;     ///< boundary_nodes x n_snap, values at the CCW boundary nodes
};

/// Linear-element mass matrix of the closed boundary polyline of a block:
/// cyclic tridiagonal with segment length h.
SpMat boundary_trace_mass(int n_boundary, Real h);

/// Harmonic extension of every boundary hat into the block. One local
/// factorization is reused for all right-hand sides.
BoundarySnapshotSet harmonic_extensions(const FineMesh& fine, const CoefficientField& field,
                                        const CoarseBlock& block);

/// Oversampled variant: hats on the enlarged window's boundary, extensions
/// solved there and restricted to the base block.
BoundarySnapshotSet harmonic_extensions_oversampled(const FineMesh& fine,
                                                    const CoefficientField& field,
                                                    const CoarseBlock& block,
                                                    const OversampleBlock& window);

/// Energy-vs-boundary-mass pencil restricted to the snapshot span.
/// For possibly dependent snapshots (oversampling) the boundary Gram is
/// rank-filtered at a relative threshold before the solve.
struct BoundarySpectrum {
  Vec mu;      ///< eigenvalues, ascending; mu[0] clamped to 0 when negligible
  Mat coeffs;  ///< snapshot-space coefficients of each mode (n_snap x n_kept)
  Mat modes;   ///< local-node vectors of each mode (local_nodes x n_kept)
  // The pencil actually solved, kept for residual audits.
  Mat pencil_a;
  Mat pencil_b;
  Mat pencil_vecs;
};
BoundarySpectrum boundary_spectral(const BoundarySnapshotSet& snaps, const FineMesh& fine,
                                   const CoefficientField& field, const CoarseBlock& block, Real H,
                                   Real rank_rel_tol = 1e-12);

/// Interior Dirichlet pencil on the block's zero-trace space; the m smallest
/// eigenpairs, L2(K)-orthonormal. Eigenvalues carry min(m+1, n0) entries so
/// the first excluded one is reportable.
struct InteriorSpectrum {
  Vec lambda;
  Mat modes;  ///< local_nodes x m, zero at boundary nodes
  Mat pencil_a, pencil_b, pencil_vecs;
};
InteriorSpectrum interior_spectral(const FineMesh& fine, const CoefficientField& field,
                                   const CoarseBlock& block, Real H, int m);

/// Smallest p with sum_{i=2..p} 1/mu_i >= theta * E, E = sum_{i>=2} 1/mu_i.
/// Mode 1 is always selected; p = 1 when E = 0.
int select_by_energy(const Vec& mu, Real theta);

/// Reciprocal-eigenvalue energy E = sum_{i>=2} 1/mu_i.
Real boundary_energy(const Vec& mu);

struct BlockBasis {
  int block_id = 0;
  int p = 0;  ///< selected boundary modes
  int m = 0;  ///< selected interior modes
  Real energy_total = 0;
  Vec mu;                ///< all kept boundary eigenvalues, ascending
  Vec lambda;            ///< interior eigenvalues, min(m+1, n0) entries
  Mat boundary_modes;    ///< local_nodes x p
  Mat interior_modes;    ///< local_nodes x m
  int dof_count() const { return p + m; }
};

struct LocalBasisBank {
  Real theta = 0;
  int m_interior = 0;
  int oversample_cells = -1;  ///< -1: oversampling off
  Real t_offline = 0;         ///< build wall time, seconds
  std::vector<BlockBasis> blocks;
  std::vector<int> offsets;  ///< block dof offsets, size blocks+1

  void rebuild_offsets();
  int total_dofs() const { return offsets.empty() ? 0 : offsets.back(); }
};

/// Offline stage over all blocks (work pool; deterministic output).
LocalBasisBank build_bank(const FineMesh& fine, const CoarseMesh& coarse,
                          const CoefficientField& field, Real theta, int m,
                          std::optional<int> oversample_cells, int threads);

/// Re-selects modes from an existing bank at a smaller energy fraction and/or
/// interior count without recomputing spectra.
LocalBasisBank slice_bank(const LocalBasisBank& bank, Real theta, int m);

/// Sectioned binary container plus `<path>.manifest` text summary.
void save_bank(const LocalBasisBank& bank, const std::string& path);
LocalBasisBank load_bank(const std::string& path);

}  // namespace gmswave

#endif
