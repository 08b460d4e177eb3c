#include "gmswave/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace gmswave {

namespace {

Vec gather_local(const Vec& block_vec, const std::vector<int>& rows) {
  Vec out(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = block_vec[rows[r]];
  return out;
}

/// int_e [u]^2 for one edge from nodal jump values (open P1 polyline).
Real polyline_quadratic(const Vec& vals, Real h) {
  Real acc = 0;
  for (int s = 0; s + 1 < vals.size(); ++s) {
    const Real f0 = vals[s], f1 = vals[s + 1];
    acc += h * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0;
  }
  return acc;
}

std::string fmt(Real v) {
  std::ostringstream ss;
  ss.precision(17);
  if (std::isnan(v))
    ss << "na";
  else
    ss << v;
  return ss.str();
}

}  // namespace

BrokenField expand(const CoarseState& state, const LocalBasisBank& bank, const CoarseMesh& coarse) {
  if (state.coeffs.size() != bank.total_dofs()) throw ConfigError("state does not match bank");
  BrokenField out;
  out.block_values.resize(coarse.blocks.size());
  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const BlockBasis& bb = bank.blocks[k];
    const Vec c = state.coeffs.segment(bank.offsets[k], bb.dof_count());
    out.block_values[k] = block_modes(bb) * c;
  }
  return out;
}

BrokenField broken_from_fine(const Vec& nodal_full, const CoarseMesh& coarse) {
  BrokenField out;
  out.block_values.resize(coarse.blocks.size());
  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    out.block_values[k] = gather_nodes(nodal_full, blk.local_nodes);
  }
  return out;
}

Vec conforming_average(const BrokenField& field, const FineMesh& fine, const CoarseMesh& coarse) {
  Vec sum = Vec::Zero(fine.node_count());
  Vec count = Vec::Zero(fine.node_count());
  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const Vec& v = field.block_values[k];
    for (size_t l = 0; l < blk.local_nodes.size(); ++l) {
      sum[blk.local_nodes[l]] += v[static_cast<Eigen::Index>(l)];
      count[blk.local_nodes[l]] += 1;
    }
  }
  return sum.array() / count.array().max(1.0);
}

Real jump_energy(const BrokenField& field, const FineMesh& fine, const CoarseMesh& coarse) {
  Real acc = 0;
  for (const CoarseEdge& edge : coarse.edges) {
    const Vec vp = gather_local(field.block_values[edge.block_plus], edge.nodes_plus_local);
    Vec jump;
    if (edge.on_boundary())
      jump = vp;
    else
      jump = vp - gather_local(field.block_values[edge.block_minus], edge.nodes_minus_local);
    acc += polyline_quadratic(jump, fine.h);
  }
  return acc;
}

ErrorReport compute_errors(const BrokenField& u_coarse, const Vec& fine_full, const FineMesh& fine,
                           const CoarseMesh& coarse, const CoefficientField& /*field*/) {
  if (u_coarse.block_values.size() != coarse.blocks.size())
    throw ConfigError("broken field does not match the coarse mesh");
  if (fine_full.size() != fine.node_count())
    throw ConfigError("fine reference must be a full-grid nodal vector");

  Real num_l2 = 0, den_l2 = 0;
  Real num_bar = 0, den_bar = 0;
  Real num_h1 = 0, den_h1 = 0;

  for (size_t k = 0; k < coarse.blocks.size(); ++k) {
    const CoarseBlock& blk = coarse.blocks[k];
    const Vec u_ref = gather_nodes(fine_full, blk.local_nodes);
    const Vec diff = u_coarse.block_values[k] - u_ref;

    const SpMat m_k = window_mass(fine, blk.i0, blk.j0, blk.bx, blk.by);
    const SpMat a1_k = window_stiffness(fine, nullptr, blk.i0, blk.j0, blk.bx, blk.by);

    num_l2 += diff.dot(m_k * diff);
    den_l2 += u_ref.dot(m_k * u_ref);
    const Real int_diff = (m_k * diff).sum();
    const Real int_ref = (m_k * u_ref).sum();
    num_bar += int_diff * int_diff;
    den_bar += int_ref * int_ref;
    num_h1 += diff.dot(a1_k * diff);
    den_h1 += u_ref.dot(a1_k * u_ref);
  }

  ErrorReport rep;
  rep.nx = fine.nx;
  rep.ny = fine.ny;
  rep.blocks_x = coarse.NX;
  rep.blocks_y = coarse.NY;
  rep.norm_u = std::sqrt(std::max(den_l2, Real(0)));
  rep.relative_valid = den_l2 > 0 && den_bar > 0 && den_h1 > 0;
  if (rep.relative_valid) {
    rep.e2 = std::sqrt(num_l2 / den_l2);
    rep.e2_bar = std::sqrt(num_bar / den_bar);
    rep.eH1 = std::sqrt(num_h1 / den_h1);
  } else {
    rep.e2 = std::sqrt(num_l2);
    rep.e2_bar = std::sqrt(num_bar);
    rep.eH1 = std::sqrt(num_h1);
  }
  rep.eJump = jump_energy(u_coarse, fine, coarse);
  return rep;
}

void fill_bank_metadata(ErrorReport& report, const LocalBasisBank& bank) {
  report.theta = bank.theta;
  report.m = bank.m_interior;
  report.oversample = bank.oversample_cells;
  report.t_off = bank.t_offline;

  int p_min = std::numeric_limits<int>::max(), p_max = 0;
  Real mu_min = std::numeric_limits<Real>::quiet_NaN();
  Real lambda_min = std::numeric_limits<Real>::quiet_NaN();
  for (const BlockBasis& bb : bank.blocks) {
    p_min = std::min(p_min, bb.p);
    p_max = std::max(p_max, bb.p);
    if (bb.p < bb.mu.size()) {
      const Real mu_next = bb.mu[bb.p];
      if (std::isnan(mu_min) || mu_next < mu_min) mu_min = mu_next;
    }
    if (bb.m < bb.lambda.size()) {
      const Real la_next = bb.lambda[bb.m];
      if (std::isnan(lambda_min) || la_next < lambda_min) lambda_min = la_next;
    }
  }
  report.p_min = bank.blocks.empty() ? 0 : p_min;
  report.p_max = p_max;
  report.mu_min = mu_min;
  report.lambda_min = lambda_min;
}

void write_report_kv(const ErrorReport& r, const std::string& path,
                     const std::string& config_text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report " + path);
  out << "e2 " << fmt(r.e2) << "\n"
      << "e2_bar " << fmt(r.e2_bar) << "\n"
      << "eH1 " << fmt(r.eH1) << "\n"
      << "eJump " << fmt(r.eJump) << "\n"
      << "relative_valid " << (r.relative_valid ? 1 : 0) << "\n"
      << "norm_u " << fmt(r.norm_u) << "\n"
      << "t_off " << fmt(r.t_off) << "\n"
      << "t_on " << fmt(r.t_on) << "\n"
      << "t_fine " << fmt(r.t_fine) << "\n"
      << "theta " << fmt(r.theta) << "\n"
      << "m " << r.m << "\n"
      << "gamma " << fmt(r.gamma) << "\n"
      << "nx " << r.nx << "\n"
      << "ny " << r.ny << "\n"
      << "blocks_x " << r.blocks_x << "\n"
      << "blocks_y " << r.blocks_y << "\n"
      << "oversample " << r.oversample << "\n"
      << "p_min " << r.p_min << "\n"
      << "p_max " << r.p_max << "\n"
      << "mu_min " << fmt(r.mu_min) << "\n"
      << "lambda_min " << fmt(r.lambda_min) << "\n";
  std::istringstream cfg(config_text);
  std::string line;
  while (std::getline(cfg, line))
    if (!line.empty()) out << "config." << line << "\n";
}

void append_report_csv(const ErrorReport& r, const std::string& path) {
  const bool fresh = !std::ifstream(path).good();
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot write results table " + path);
  if (fresh)
    out << "theta,p_min,p_max,m,e2,e2_bar,eH1,eJump,mu_min,lambda_min,"
           "t_off,t_on,t_fine,gamma,nx,blocks_x,oversample\n";
  out << fmt(r.theta) << "," << r.p_min << "," << r.p_max << "," << r.m << "," << fmt(r.e2) << ","
      << fmt(r.e2_bar) << "," << fmt(r.eH1) << "," << fmt(r.eJump) << "," << fmt(r.mu_min) << ","
      << fmt(r.lambda_min) << "," << fmt(r.t_off) << "," << fmt(r.t_on) << "," << fmt(r.t_fine)
      << "," << fmt(r.gamma) << "," << r.nx << "," << r.blocks_x << "," << r.oversample << "\n";
}

}  // namespace gmswave
