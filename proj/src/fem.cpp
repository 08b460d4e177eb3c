#include "gmswave/fem.hpp"

#include <fstream>

namespace gmswave {

Real SparseOperator::symmetry_defect() const {
  const SpMat t = SpMat(matrix.transpose());
  Real max_abs = 0;
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (SpMat::InnerIterator it(matrix, k); it; ++it) max_abs = std::max(max_abs, std::abs(it.value()));
  if (max_abs == 0) return 0;
  Real defect = 0;
  const SpMat d = matrix - t;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SpMat::InnerIterator it(d, k); it; ++it) defect = std::max(defect, std::abs(it.value()));
  return defect / max_abs;
}

DirichletMap boundary_dirichlet_map(const FineMesh& fine) {
  DirichletMap map;
  map.free_of_node.assign(fine.node_count(), -1);
  for (int j = 0; j <= fine.ny; ++j) {
    for (int i = 0; i <= fine.nx; ++i) {
      if (fine.node_on_boundary(i, j)) continue;
      map.free_of_node[fine.node_id(i, j)] = static_cast<int>(map.node_of_free.size());
      map.node_of_free.push_back(fine.node_id(i, j));
    }
  }
  return map;
}

std::pair<SparseOperator, SparseOperator> assemble_global(const FineMesh& fine,
                                                          const CoefficientField& field,
                                                          bool dirichlet) {
  if (field.cell_values.size() != fine.cell_count())
    throw ConfigError("coefficient field does not match mesh");

  const DirichletMap dmap = dirichlet ? boundary_dirichlet_map(fine) : DirichletMap{};
  auto dof_of = [&](int node) { return dirichlet ? dmap.free_of_node[node] : node; };
  const int n_dof = dirichlet ? dmap.free_count() : fine.node_count();

  const Eigen::Matrix<Real, 4, 4> m_cell = q1_cell_mass<Real>(fine.h);
  std::vector<Triplet> ts, tm;
  ts.reserve(static_cast<size_t>(fine.cell_count()) * 16);
  tm.reserve(static_cast<size_t>(fine.cell_count()) * 16);

  for (int cj = 0; cj < fine.ny; ++cj) {
    for (int ci = 0; ci < fine.nx; ++ci) {
      const auto nodes = fine.cell_nodes(ci, cj);
      const Eigen::Matrix<Real, 4, 4> k_cell =
          q1_cell_stiffness<Real>(field.at(fine.cell_id(ci, cj)), fine.h);
      for (int r = 0; r < 4; ++r) {
        const int dr = dof_of(nodes[r]);
        if (dr < 0) continue;
        for (int c = 0; c < 4; ++c) {
          const int dc = dof_of(nodes[c]);
          if (dc < 0) continue;
          ts.emplace_back(dr, dc, k_cell(r, c));
          tm.emplace_back(dr, dc, m_cell(r, c));
        }
      }
    }
  }

  SparseOperator stiffness, mass;
  stiffness.matrix.resize(n_dof, n_dof);
  stiffness.matrix.setFromTriplets(ts.begin(), ts.end());
  mass.matrix.resize(n_dof, n_dof);
  mass.matrix.setFromTriplets(tm.begin(), tm.end());
  return {std::move(stiffness), std::move(mass)};
}

Vec load_vector(const Vec& node_values, const SpMat& mass) {
  if (node_values.size() != mass.rows()) throw ConfigError("load interpolant size mismatch");
  if (!node_values.allFinite()) throw DataError("non-finite source values");
  return mass * node_values;
}

namespace {

template <class NodeOf>
SpMat window_operator(const FineMesh& fine, const CoefficientField* field, int i0, int j0, int bx,
                      int by, bool mass, NodeOf local_of) {
  const Eigen::Matrix<Real, 4, 4> m_cell = q1_cell_mass<Real>(fine.h);
  std::vector<Triplet> tr;
  tr.reserve(static_cast<size_t>(bx) * by * 16);
  for (int cj = 0; cj < by; ++cj) {
    for (int ci = 0; ci < bx; ++ci) {
      Eigen::Matrix<Real, 4, 4> cell;
      if (mass)
        cell = m_cell;
      else
        cell = q1_cell_stiffness<Real>(
            field ? field->at(fine.cell_id(i0 + ci, j0 + cj)) : Real(1), fine.h);
      const int l[4] = {local_of(ci, cj), local_of(ci + 1, cj), local_of(ci + 1, cj + 1),
                        local_of(ci, cj + 1)};
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) tr.emplace_back(l[r], l[c], cell(r, c));
    }
  }
  SpMat out(static_cast<Eigen::Index>(bx + 1) * (by + 1), static_cast<Eigen::Index>(bx + 1) * (by + 1));
  out.setFromTriplets(tr.begin(), tr.end());
  return out;
}

}  // namespace

SpMat window_stiffness(const FineMesh& fine, const CoefficientField* field, int i0, int j0, int bx,
                       int by) {
  auto local_of = [bx](int li, int lj) { return lj * (bx + 1) + li; };
  return window_operator(fine, field, i0, j0, bx, by, false, local_of);
}

SpMat window_mass(const FineMesh& fine, int i0, int j0, int bx, int by) {
  auto local_of = [bx](int li, int lj) { return lj * (bx + 1) + li; };
  return window_operator(fine, nullptr, i0, j0, bx, by, true, local_of);
}

Vec gather_nodes(const Vec& full, const std::vector<int>& node_ids) {
  Vec out(static_cast<Eigen::Index>(node_ids.size()));
  for (size_t k = 0; k < node_ids.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[node_ids[k]];
  return out;
}

void dump_matrix_coord(const SpMat& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write matrix dump " + path);
  out.precision(17);
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

}  // namespace gmswave
