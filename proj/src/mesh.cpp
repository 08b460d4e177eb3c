#include "gmswave/mesh.hpp"

#include <cmath>
#include <string>

namespace gmswave {

namespace {

CoarseBlock make_block(const FineMesh& fine, int id, int bi, int bj, int bx, int by) {
  CoarseBlock blk;
  blk.id = id;
  blk.bi = bi;
  blk.bj = bj;
  blk.bx = bx;
  blk.by = by;
  blk.i0 = bi * bx;
  blk.j0 = bj * by;

  blk.cells.reserve(static_cast<size_t>(bx) * by);
  for (int cj = 0; cj < by; ++cj)
    for (int ci = 0; ci < bx; ++ci) blk.cells.push_back(fine.cell_id(blk.i0 + ci, blk.j0 + cj));

  blk.local_nodes.reserve(static_cast<size_t>(bx + 1) * (by + 1));
  for (int lj = 0; lj <= by; ++lj)
    for (int li = 0; li <= bx; ++li) blk.local_nodes.push_back(fine.node_id(blk.i0 + li, blk.j0 + lj));

  // CCW boundary walk starting at the lower-left corner.
  for (int li = 0; li <= bx; ++li) blk.boundary_local.push_back(blk.local_index(li, 0));
  for (int lj = 1; lj <= by; ++lj) blk.boundary_local.push_back(blk.local_index(bx, lj));
  for (int li = bx - 1; li >= 0; --li) blk.boundary_local.push_back(blk.local_index(li, by));
  for (int lj = by - 1; lj >= 1; --lj) blk.boundary_local.push_back(blk.local_index(0, lj));

  for (int lj = 1; lj < by; ++lj)
    for (int li = 1; li < bx; ++li) blk.interior_local.push_back(blk.local_index(li, lj));

  return blk;
}

}  // namespace

std::pair<FineMesh, CoarseMesh> build_hierarchy(int nx, int ny, int blocks_x, int blocks_y,
                                                Real width, Real height) {
  if (nx <= 0 || ny <= 0 || blocks_x <= 0 || blocks_y <= 0)
    throw ConfigError("mesh counts must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("domain extent must be positive");
  if (nx % blocks_x != 0)
    throw ConfigError("nx=" + std::to_string(nx) + " not divisible by blocks_x=" +
                      std::to_string(blocks_x));
  if (ny % blocks_y != 0)
    throw ConfigError("ny=" + std::to_string(ny) + " not divisible by blocks_y=" +
                      std::to_string(blocks_y));

  const Real hx = width / nx;
  const Real hy = height / ny;
  if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
    throw ConfigError("cells must be square: width/nx != height/ny");

  const int bx = nx / blocks_x;
  const int by = ny / blocks_y;
  if (bx != by) throw ConfigError("blocks must be square: nx/blocks_x != ny/blocks_y");

  FineMesh fine;
  fine.nx = nx;
  fine.ny = ny;
  fine.h = hx;
  fine.width = width;
  fine.height = height;

  CoarseMesh coarse;
  coarse.NX = blocks_x;
  coarse.NY = blocks_y;
  coarse.H = bx * hx;

  coarse.blocks.reserve(static_cast<size_t>(blocks_x) * blocks_y);
  for (int bj = 0; bj < blocks_y; ++bj)
    for (int bi = 0; bi < blocks_x; ++bi)
      coarse.blocks.push_back(make_block(fine, coarse.block_id(bi, bj), bi, bj, bx, by));

  // Interior vertical edges: K+ = left block, normal +x.
  for (int bj = 0; bj < blocks_y; ++bj) {
    for (int bi = 0; bi + 1 < blocks_x; ++bi) {
      CoarseEdge e;
      e.block_plus = coarse.block_id(bi, bj);
      e.block_minus = coarse.block_id(bi + 1, bj);
      e.normal_axis = 0;
      e.normal_sign = 1.0;
      const int I = (bi + 1) * bx;  // fine node column of the edge
      const int j0 = bj * by;
      for (int t = 0; t < by; ++t) {
        SubEdge s;
        s.n0 = fine.node_id(I, j0 + t);
        s.n1 = fine.node_id(I, j0 + t + 1);
        s.cell_plus = fine.cell_id(I - 1, j0 + t);
        s.cell_minus = fine.cell_id(I, j0 + t);
        e.subs.push_back(s);
      }
      const CoarseBlock& kp = coarse.blocks[e.block_plus];
      const CoarseBlock& km = coarse.blocks[e.block_minus];
      for (int t = 0; t <= by; ++t) {
        e.nodes_plus_local.push_back(kp.local_index(bx, t));
        e.nodes_minus_local.push_back(km.local_index(0, t));
      }
      coarse.edges.push_back(std::move(e));
    }
  }

  // Interior horizontal edges: K+ = lower block, normal +y.
  for (int bj = 0; bj + 1 < blocks_y; ++bj) {
    for (int bi = 0; bi < blocks_x; ++bi) {
      CoarseEdge e;
      e.block_plus = coarse.block_id(bi, bj);
      e.block_minus = coarse.block_id(bi, bj + 1);
      e.normal_axis = 1;
      e.normal_sign = 1.0;
      const int J = (bj + 1) * by;
      const int i0 = bi * bx;
      for (int t = 0; t < bx; ++t) {
        SubEdge s;
        s.n0 = fine.node_id(i0 + t, J);
        s.n1 = fine.node_id(i0 + t + 1, J);
        s.cell_plus = fine.cell_id(i0 + t, J - 1);
        s.cell_minus = fine.cell_id(i0 + t, J);
        e.subs.push_back(s);
      }
      const CoarseBlock& kp = coarse.blocks[e.block_plus];
      const CoarseBlock& km = coarse.blocks[e.block_minus];
      for (int t = 0; t <= bx; ++t) {
        e.nodes_plus_local.push_back(kp.local_index(t, by));
        e.nodes_minus_local.push_back(km.local_index(t, 0));
      }
      coarse.edges.push_back(std::move(e));
    }
  }

  // Domain-boundary edges, one per block side on the boundary; outward normal.
  auto add_boundary_edge = [&](int bid, int axis, Real sign, int fixed, int r0, bool horizontal) {
    CoarseEdge e;
    e.block_plus = bid;
    e.normal_axis = axis;
    e.normal_sign = sign;
    const int len = horizontal ? bx : by;
    for (int t = 0; t < len; ++t) {
      SubEdge s;
      if (horizontal) {
        s.n0 = fine.node_id(r0 + t, fixed);
        s.n1 = fine.node_id(r0 + t + 1, fixed);
        s.cell_plus = fine.cell_id(r0 + t, sign > 0 ? fixed - 1 : fixed);
      } else {
        s.n0 = fine.node_id(fixed, r0 + t);
        s.n1 = fine.node_id(fixed, r0 + t + 1);
        s.cell_plus = fine.cell_id(sign > 0 ? fixed - 1 : fixed, r0 + t);
      }
      e.subs.push_back(s);
    }
    const CoarseBlock& kp = coarse.blocks[bid];
    for (int t = 0; t <= len; ++t) {
      if (horizontal)
        e.nodes_plus_local.push_back(kp.local_index(t, sign > 0 ? by : 0));
      else
        e.nodes_plus_local.push_back(kp.local_index(sign > 0 ? bx : 0, t));
    }
    coarse.edges.push_back(std::move(e));
  };

  for (int bi = 0; bi < blocks_x; ++bi) {
    add_boundary_edge(coarse.block_id(bi, 0), 1, -1.0, 0, bi * bx, true);
    add_boundary_edge(coarse.block_id(bi, blocks_y - 1), 1, +1.0, ny, bi * bx, true);
  }
  for (int bj = 0; bj < blocks_y; ++bj) {
    add_boundary_edge(coarse.block_id(0, bj), 0, -1.0, 0, bj * by, false);
    add_boundary_edge(coarse.block_id(blocks_x - 1, bj), 0, +1.0, nx, bj * by, false);
  }

  return {fine, coarse};
}

OversampleMap build_oversample_map(const FineMesh& fine, const CoarseMesh& coarse, int ext_cells) {
  if (ext_cells < 0) throw ConfigError("oversample extension must be >= 0");

  OversampleMap map;
  map.ext_cells = ext_cells;
  map.blocks.reserve(coarse.blocks.size());

  for (const CoarseBlock& blk : coarse.blocks) {
    OversampleBlock ob;
    ob.i0 = std::max(0, blk.i0 - ext_cells);
    ob.j0 = std::max(0, blk.j0 - ext_cells);
    const int i1 = std::min(fine.nx, blk.i0 + blk.bx + ext_cells);
    const int j1 = std::min(fine.ny, blk.j0 + blk.by + ext_cells);
    ob.bx = i1 - ob.i0;
    ob.by = j1 - ob.j0;

    ob.local_nodes.reserve(static_cast<size_t>(ob.bx + 1) * (ob.by + 1));
    for (int lj = 0; lj <= ob.by; ++lj)
      for (int li = 0; li <= ob.bx; ++li)
        ob.local_nodes.push_back(fine.node_id(ob.i0 + li, ob.j0 + lj));

    auto windex = [&](int li, int lj) { return lj * (ob.bx + 1) + li; };
    for (int li = 0; li <= ob.bx; ++li) ob.boundary_local.push_back(windex(li, 0));
    for (int lj = 1; lj <= ob.by; ++lj) ob.boundary_local.push_back(windex(ob.bx, lj));
    for (int li = ob.bx - 1; li >= 0; --li) ob.boundary_local.push_back(windex(li, ob.by));
    for (int lj = ob.by - 1; lj >= 1; --lj) ob.boundary_local.push_back(windex(0, lj));

    const int di = blk.i0 - ob.i0;
    const int dj = blk.j0 - ob.j0;
    ob.restrict_map.reserve(blk.local_nodes.size());
    for (int lj = 0; lj <= blk.by; ++lj)
      for (int li = 0; li <= blk.bx; ++li) ob.restrict_map.push_back(windex(li + di, lj + dj));

    map.blocks.push_back(std::move(ob));
  }
  return map;
}

}  // namespace gmswave
