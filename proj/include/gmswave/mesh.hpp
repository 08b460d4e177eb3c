#ifndef GMSWAVE_MESH_HPP
#define GMSWAVE_MESH_HPP

#include "gmswave/types.hpp"

#include <array>
#include <vector>

namespace gmswave {

/// Uniform rectangular fine grid of square cells over [0,width]x[0,height].
struct FineMesh {
  int nx = 0;  ///< cells along x
  int ny = 0;  ///< cells along y
  Real h = 0;  ///< cell side length (equal per axis)
  Real width = 1.0;
  Real height = 1.0;

  int node_count() const { return (nx + 1) * (ny + 1); }
  int cell_count() const { return nx * ny; }

  int node_id(int i, int j) const { return j * (nx + 1) + i; }
  int cell_id(int i, int j) const { return j * nx + i; }

  /// Corner nodes of cell (ci,cj), counterclockwise from lower-left.
  std::array<int, 4> cell_nodes(int ci, int cj) const {
    return {node_id(ci, cj), node_id(ci + 1, cj), node_id(ci + 1, cj + 1), node_id(ci, cj + 1)};
  }

  bool node_on_boundary(int i, int j) const { return i == 0 || j == 0 || i == nx || j == ny; }

  Real node_x(int i) const { return i * h; }
  Real node_y(int j) const { return j * h; }
  /// Cell midpoint.
  Real cell_cx(int ci) const { return (ci + 0.5) * h; }
  Real cell_cy(int cj) const { return (cj + 0.5) * h; }
};

/// One coarse block: a bx-by-by window of fine cells plus node index structures.
struct CoarseBlock {
  int id = 0;
  int bi = 0, bj = 0;  ///< block coordinates in the coarse grid
  int i0 = 0, j0 = 0;  ///< first fine-cell indices of the window
  int bx = 0, by = 0;  ///< fine cells per side

  std::vector<int> cells;           ///< fine cell ids, row-major within the window
  std::vector<int> local_nodes;     ///< fine node ids, row-major, (bx+1)*(by+1)
  std::vector<int> boundary_local;  ///< local indices of boundary nodes, CCW from lower-left
  std::vector<int> interior_local;  ///< local indices of interior nodes, row-major

  int local_node_count() const { return (bx + 1) * (by + 1); }
  int local_index(int li, int lj) const { return lj * (bx + 1) + li; }
  int boundary_count() const { return static_cast<int>(boundary_local.size()); }
  int interior_count() const { return static_cast<int>(interior_local.size()); }
};

/// One fine sub-edge of a coarse edge, with the adjacent fine cells.
struct SubEdge {
  int n0 = -1, n1 = -1;    ///< fine node ids, ordered along the edge tangent
  int cell_plus = -1;      ///< fine cell on the K+ side
  int cell_minus = -1;     ///< fine cell on the K- side (-1 on the domain boundary)
};

/// A coarse edge: either shared by two blocks or lying on the domain boundary.
/// The unit normal is normal_sign * e_{normal_axis} and points from K+ to K-
/// (outward on boundary edges).
struct CoarseEdge {
  int block_plus = -1;
  int block_minus = -1;  ///< -1 for boundary edges
  int normal_axis = 0;   ///< 0: x, 1: y
  Real normal_sign = 1.0;
  std::vector<SubEdge> subs;
  std::vector<int> nodes_plus_local;   ///< local indices of the edge nodes in block_plus
  std::vector<int> nodes_minus_local;  ///< same for block_minus; empty on boundary edges

  bool on_boundary() const { return block_minus < 0; }
  int sub_count() const { return static_cast<int>(subs.size()); }
};

/// Coarse partition of the fine grid into square blocks, with the edge set.
struct CoarseMesh {
  int NX = 0, NY = 0;  ///< block counts per axis
  Real H = 0;          ///< block side length
  std::vector<CoarseBlock> blocks;
  std::vector<CoarseEdge> edges;

  int block_count() const { return NX * NY; }
  int block_id(int bi, int bj) const { return bj * NX + bi; }
};

/// Enlarged block windows for oversampled snapshot computations.
struct OversampleBlock {
  int i0 = 0, j0 = 0;  ///< first fine-cell indices of the enlarged window
  int bx = 0, by = 0;  ///< fine cells per side of the enlarged window
  std::vector<int> local_nodes;     ///< fine node ids of the window, row-major
  std::vector<int> boundary_local;  ///< CCW boundary node local indices of the window
  std::vector<int> restrict_map;    ///< base-block local node index -> window local index

  int local_node_count() const { return (bx + 1) * (by + 1); }
};

struct OversampleMap {
  int ext_cells = 0;
  std::vector<OversampleBlock> blocks;
};

/// Builds the fine mesh and its coarse partition.
/// Requires blocks_x | nx, blocks_y | ny, square cells and square blocks.
std::pair<FineMesh, CoarseMesh> build_hierarchy(int nx, int ny, int blocks_x, int blocks_y,
                                                Real width = 1.0, Real height = 1.0);

/// Extends every block by ext_cells fine layers per side, clipped at the domain.
OversampleMap build_oversample_map(const FineMesh& fine, const CoarseMesh& coarse, int ext_cells);

}  // namespace gmswave

#endif
