#ifndef GMSWAVE_FEM_HPP
#define GMSWAVE_FEM_HPP

#include "gmswave/media.hpp"
#include "gmswave/mesh.hpp"
#include "gmswave/types.hpp"

#include <string>
#include <vector>

namespace gmswave {

/// Exact stiffness of a bilinear element on an h-by-h cell with constant
/// coefficient a_c. Corner ordering is CCW from lower-left; the result is
/// independent of h in 2-D.
template <class Scalar>
Eigen::Matrix<Scalar, 4, 4> q1_cell_stiffness(Scalar a_c, Scalar /*h*/) {
  Eigen::Matrix<Scalar, 4, 4> k;
  const Scalar s = a_c / Scalar(6);
  k << 4, -1, -2, -1,
      -1, 4, -1, -2,
      -2, -1, 4, -1,
      -1, -2, -1, 4;
  return s * k;
}

/// Exact consistent mass of a bilinear element on an h-by-h cell.
template <class Scalar>
Eigen::Matrix<Scalar, 4, 4> q1_cell_mass(Scalar h) {
  Eigen::Matrix<Scalar, 4, 4> m;
  const Scalar s = h * h / Scalar(36);
  m << 4, 2, 1, 2,
      2, 4, 2, 1,
      1, 2, 4, 2,
      2, 1, 2, 4;
  return s * m;
}

/// Symmetric sparse operator with a cheap symmetry audit.
struct SparseOperator {
  SpMat matrix;
  bool symmetric = true;

  Eigen::Index rows() const { return matrix.rows(); }
  /// Max relative asymmetry over stored entries.
  Real symmetry_defect() const;
};

/// Map between full node ids and free (non-Dirichlet) indices.
struct DirichletMap {
  std::vector<int> free_of_node;  ///< node id -> free index, -1 on the boundary
  std::vector<int> node_of_free;  ///< free index -> node id
  int free_count() const { return static_cast<int>(node_of_free.size()); }
};

/// Homogeneous Dirichlet map over the whole domain boundary.
DirichletMap boundary_dirichlet_map(const FineMesh& fine);

/// Global stiffness and consistent mass on the fine grid. With dirichlet=true
/// both operators are restricted to free nodes by row/column elimination.
std::pair<SparseOperator, SparseOperator> assemble_global(const FineMesh& fine,
                                                          const CoefficientField& field,
                                                          bool dirichlet);

/// L2 pairing of the nodal interpolant of a source: mass * node_values.
Vec load_vector(const Vec& node_values, const SpMat& mass);

/// Local operators on a window of cells [i0,i0+bx) x [j0,j0+by), indexed by
/// the window's row-major nodes. Pass field=nullptr for unit coefficient.
SpMat window_stiffness(const FineMesh& fine, const CoefficientField* field, int i0, int j0, int bx,
                       int by);
SpMat window_mass(const FineMesh& fine, int i0, int j0, int bx, int by);

/// Restricts a full-grid nodal vector to a window's row-major local nodes.
Vec gather_nodes(const Vec& full, const std::vector<int>& node_ids);

/// Coordinate text export (1-based "i j value" lines) for debugging.
void dump_matrix_coord(const SpMat& m, const std::string& path);

/// Nodal coefficients over free fine nodes at a time stamp.
struct FineState {
  Vec values;
  Real t = 0;
};

}  // namespace gmswave

#endif
