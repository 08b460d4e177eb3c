#include "gmswave/mesh.hpp"

#include "doctest.h"

#include <set>

using namespace gmswave;

TEST_CASE("hierarchy at paper scale: 512^2 cells, 16x16 blocks") {
  auto [fine, coarse] = build_hierarchy(512, 512, 16, 16);
  CHECK(fine.h == doctest::Approx(1.0 / 512));
  CHECK(coarse.H == doctest::Approx(1.0 / 16));
  CHECK(coarse.block_count() == 256);
  const CoarseBlock& blk = coarse.blocks[0];
  CHECK(blk.bx == 32);
  CHECK(blk.boundary_count() == 128);
  CHECK(blk.interior_count() == 961);
}

TEST_CASE("smallest hierarchy: 2x2 cells, one block") {
  auto [fine, coarse] = build_hierarchy(2, 2, 1, 1);
  CHECK(fine.node_count() == 9);
  CHECK(coarse.blocks[0].boundary_count() == 8);
  CHECK(coarse.blocks[0].interior_count() == 1);
  // one block: only the four domain-boundary edges
  CHECK(coarse.edges.size() == 4);
  for (const CoarseEdge& e : coarse.edges) CHECK(e.on_boundary());
}

TEST_CASE("non-divisible block count is rejected") {
  CHECK_THROWS_AS(build_hierarchy(512, 512, 15, 16), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(512, 512, 16, 15), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(16, 16, 4, 4, 1.0, 2.0), ConfigError);  // non-square cells
  CHECK_THROWS_AS(build_hierarchy(16, 32, 4, 4), ConfigError);            // non-square blocks
}

TEST_CASE("blocks partition the fine cells") {
  auto [fine, coarse] = build_hierarchy(24, 24, 3, 3);
  std::vector<int> owner(fine.cell_count(), 0);
  for (const CoarseBlock& blk : coarse.blocks)
    for (int c : blk.cells) owner[c]++;
  for (int v : owner) CHECK(v == 1);
}

TEST_CASE("interior edges are consistent across the two blocks") {
  auto [fine, coarse] = build_hierarchy(16, 16, 4, 4);
  int interior = 0;
  std::set<std::pair<int, int>> sub_edges;
  for (const CoarseEdge& e : coarse.edges) {
    if (e.on_boundary()) continue;
    ++interior;
    CHECK(e.block_plus < e.block_minus);
    const CoarseBlock& kp = coarse.blocks[e.block_plus];
    const CoarseBlock& km = coarse.blocks[e.block_minus];
    REQUIRE(e.nodes_plus_local.size() == e.nodes_minus_local.size());
    for (size_t t = 0; t < e.nodes_plus_local.size(); ++t)
      CHECK(kp.local_nodes[e.nodes_plus_local[t]] == km.local_nodes[e.nodes_minus_local[t]]);
    for (const SubEdge& s : e.subs) {
      CHECK(sub_edges.emplace(std::min(s.n0, s.n1), std::max(s.n0, s.n1)).second);
      CHECK(s.cell_plus >= 0);
      CHECK(s.cell_minus >= 0);
    }
  }
  CHECK(interior == 3 * 4 + 4 * 3);
  CHECK(coarse.edges.size() == size_t(interior + 2 * 4 + 2 * 4));
}

TEST_CASE("boundary node walk is CCW from the lower-left corner") {
  auto [fine, coarse] = build_hierarchy(4, 4, 2, 2);
  const CoarseBlock& blk = coarse.blocks[0];  // lower-left block, 2x2 cells
  REQUIRE(blk.boundary_count() == 8);
  // lower-left corner first, then along the bottom
  CHECK(blk.local_nodes[blk.boundary_local[0]] == fine.node_id(0, 0));
  CHECK(blk.local_nodes[blk.boundary_local[1]] == fine.node_id(1, 0));
  CHECK(blk.local_nodes[blk.boundary_local[2]] == fine.node_id(2, 0));
  CHECK(blk.local_nodes[blk.boundary_local[3]] == fine.node_id(2, 1));
  CHECK(blk.local_nodes[blk.boundary_local[4]] == fine.node_id(2, 2));
  CHECK(blk.local_nodes[blk.boundary_local[5]] == fine.node_id(1, 2));
  CHECK(blk.local_nodes[blk.boundary_local[6]] == fine.node_id(0, 2));
  CHECK(blk.local_nodes[blk.boundary_local[7]] == fine.node_id(0, 1));
}

TEST_CASE("oversample map: paper extension H/16 = 2 cells") {
  auto [fine, coarse] = build_hierarchy(512, 512, 16, 16);
  const OversampleMap map = build_oversample_map(fine, coarse, 2);
  // interior block grows by 2 on every side
  const CoarseBlock& mid = coarse.blocks[coarse.block_id(8, 8)];
  const OversampleBlock& ob = map.blocks[mid.id];
  CHECK(ob.bx == 36);
  CHECK(ob.by == 36);
  CHECK(ob.i0 == mid.i0 - 2);
  // corner block is clipped to the domain on two sides
  const OversampleBlock& corner = map.blocks[coarse.block_id(0, 0)];
  CHECK(corner.i0 == 0);
  CHECK(corner.j0 == 0);
  CHECK(corner.bx == 34);
  CHECK(corner.by == 34);
}

TEST_CASE("oversample map with zero extension is the identity") {
  auto [fine, coarse] = build_hierarchy(16, 16, 4, 4);
  const OversampleMap map = build_oversample_map(fine, coarse, 0);
  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const OversampleBlock& ob = map.blocks[k];
    CHECK(ob.bx == blk.bx);
    CHECK(ob.local_nodes == blk.local_nodes);
    for (size_t l = 0; l < blk.local_nodes.size(); ++l)
      CHECK(ob.restrict_map[l] == static_cast<int>(l));
  }
}

TEST_CASE("restriction map points at the base block nodes") {
  auto [fine, coarse] = build_hierarchy(16, 16, 4, 4);
  const OversampleMap map = build_oversample_map(fine, coarse, 2);
  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const OversampleBlock& ob = map.blocks[k];
    for (size_t l = 0; l < blk.local_nodes.size(); ++l)
      CHECK(ob.local_nodes[ob.restrict_map[l]] == blk.local_nodes[l]);
  }
}
