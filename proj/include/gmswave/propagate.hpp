#ifndef GMSWAVE_PROPAGATE_HPP
#define GMSWAVE_PROPAGATE_HPP

#include "gmswave/fem.hpp"
#include "gmswave/ipdg.hpp"
#include "gmswave/lanczos.hpp"
#include "gmswave/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace gmswave {

/// Uniform time axis t_n = n*dt, n = 0..steps.
struct TimeGrid {
  Real T = 0;
  Real dt = 0;
  std::int64_t steps = 0;

  /// Requires T/dt to be an integer up to rounding.
  static TimeGrid from_step(Real T, Real dt);
  /// Largest step count whose dt does not exceed dt_max.
  static TimeGrid fit(Real T, Real dt_max);

  Real time_of(std::int64_t n) const { return static_cast<Real>(n) * dt; }
  std::int64_t step_of(Real t) const { return std::llround(t / dt); }
};

enum class SourceKind { none, ricker, manufactured, bump };

/// Source term and initial-data profiles of a run.
struct SourceSpec {
  SourceKind kind = SourceKind::none;
  Real f0 = 20.0;       ///< center frequency of the wavelet
  Real cx = 0.5, cy = 0.5;
  Real decay = 100.0;   ///< spatial Gaussian exponent
  Real amplitude = 100.0;
  Real radius = 0.125;  ///< support radius of the bump initial displacement
  std::function<Real(Real, Real)> g0, g1;  ///< initial displacement/velocity; null = zero

  Real spatial(Real x, Real y) const {
    const Real dx = x - cx, dy = y - cy;
    return amplitude * std::exp(-decay * (dx * dx + dy * dy));
  }
  Real time_factor(Real t) const;
  bool has_source() const { return kind == SourceKind::ricker; }
};

/// Wavelet point value; zero for source-free variants.
Real ricker_eval(Real x, Real y, Real t, const SourceSpec& spec);

/// beta(h) lower bound for the explicit scheme: dt^2 < 4 beta(h).
Real beta_paper(Real h, Real a1, Real gamma, Real lambda_trace);

/// Fine-grid wave system: sparse stiffness, factorized (or lumped) mass.
class FineWaveSystem {
 public:
  FineWaveSystem(const SpMat& stiffness, const SpMat& mass, bool lump_mass = false)
      : stiffness_(&stiffness), mass_(&mass), lumped_(lump_mass) {
    if (lumped_) {
      lumped_diag_ = Vec::Zero(mass.rows());
      for (int k = 0; k < mass.outerSize(); ++k)
        for (SpMat::InnerIterator it(mass, k); it; ++it) lumped_diag_[it.row()] += it.value();
    } else {
      llt_.compute(mass);
      if (llt_.info() != Eigen::Success) throw InternalError("fine mass factorization failed");
    }
  }

  void set_load(Vec spatial_load, std::function<Real(Real)> time_factor) {
    spatial_load_ = std::move(spatial_load);
    time_factor_ = std::move(time_factor);
  }

  Eigen::Index dim() const { return stiffness_->rows(); }
  Vec apply_stiffness(const Vec& x) const { return *stiffness_ * x; }
  Vec apply_mass(const Vec& x) const { return *mass_ * x; }
  void solve_mass_inplace(Vec& x) const {
    if (lumped_)
      x.array() /= lumped_diag_.array();
    else
      x = llt_.solve(x).eval();
  }
  /// y -= F(t)
  void subtract_load(Real t, Vec& y) const {
    if (spatial_load_.size()) y -= time_factor_(t) * spatial_load_;
  }

 private:
  const SpMat* stiffness_;
  const SpMat* mass_;
  bool lumped_;
  Vec lumped_diag_;
  Eigen::SimplicialLLT<SpMat> llt_;
  Vec spatial_load_;
  std::function<Real(Real)> time_factor_;
};

/// Coarse multiscale system over a DGSystem (block-diagonal mass solves).
class CoarseWaveSystem {
 public:
  explicit CoarseWaveSystem(const DGSystem& system) : system_(&system) {}

  void set_load(Vec spatial_load, std::function<Real(Real)> time_factor) {
    spatial_load_ = std::move(spatial_load);
    time_factor_ = std::move(time_factor);
  }

  Eigen::Index dim() const { return system_->stiffness.rows(); }
  Vec apply_stiffness(const Vec& x) const { return system_->stiffness * x; }
  Vec apply_mass(const Vec& x) const { return system_->apply_mass(x); }
  void solve_mass_inplace(Vec& x) const { system_->solve_mass_inplace(x); }
  void subtract_load(Real t, Vec& y) const {
    if (spatial_load_.size()) y -= time_factor_(t) * spatial_load_;
  }

 private:
  const DGSystem* system_;
  Vec spatial_load_;
  std::function<Real(Real)> time_factor_;
};

/// u0 = projected g0; u1 = u0 + dt*v0 + dt^2/2 * M^{-1}(F(0) - S u0).
template <class System>
std::pair<Vec, Vec> init_states(const System& sys, const Vec& u0, const Vec& v0, Real dt) {
  Vec r = sys.apply_stiffness(u0);
  sys.subtract_load(0.0, r);
  sys.solve_mass_inplace(r);
  Vec u1 = u0 + dt * v0 - 0.5 * dt * dt * r;
  return {u0, std::move(u1)};
}

struct LeapfrogOptions {
  std::int64_t check_every = 16;  ///< NaN/blow-up probe interval
  Real abort_norm = std::numeric_limits<Real>::infinity();
};

struct LeapfrogResult {
  Vec u_final;   ///< state at the last completed step
  Vec u_prev;    ///< one step earlier (for energy audits / reversal)
  Real t_online = 0;
  std::int64_t steps_done = 0;
  bool aborted = false;  ///< norm bound exceeded before finishing
  std::int64_t abort_step = -1;
  std::vector<std::pair<std::int64_t, Vec>> probes;
};

/// Central-difference evolution from (u^0, u^1) through step `grid.steps`.
/// Per step: one stiffness matvec and one mass solve.
template <class System>
LeapfrogResult leapfrog_run(const System& sys, Vec u0, Vec u1, const TimeGrid& grid,
                            const std::vector<std::int64_t>& probe_steps = {},
                            const LeapfrogOptions& opts = {}) {
  LeapfrogResult res;
  auto record_probe = [&](std::int64_t n, const Vec& u) {
    for (std::int64_t p : probe_steps)
      if (p == n) res.probes.emplace_back(n, u);
  };
  record_probe(0, u0);
  record_probe(1, u1);

  const Real dt2 = grid.dt * grid.dt;
  const auto t_start = std::chrono::steady_clock::now();
  std::int64_t n = 1;
  for (; n < grid.steps; ++n) {
    Vec r = sys.apply_stiffness(u1);
    sys.subtract_load(grid.time_of(n), r);
    sys.solve_mass_inplace(r);
    Vec u2 = 2.0 * u1 - u0 - dt2 * r;
    u0.swap(u1);
    u1.swap(u2);
    record_probe(n + 1, u1);
    if ((n + 1) % opts.check_every == 0 || n + 1 == grid.steps) {
      const Real nrm = u1.norm();
      if (!std::isfinite(nrm))
        throw InstabilityError("non-finite state at step " + std::to_string(n + 1));
      if (nrm > opts.abort_norm) {
        res.aborted = true;
        res.abort_step = n + 1;
        ++n;
        break;
      }
    }
  }
  res.t_online = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  res.steps_done = n;
  res.u_final = std::move(u1);
  res.u_prev = std::move(u0);
  return res;
}

/// Conserved quantity of the source-free recurrence:
/// E = 1/2 ||(u_b - u_a)/dt||_M^2 + 1/2 u_b^T S u_a.
template <class System>
Real leapfrog_energy(const System& sys, const Vec& u_a, const Vec& u_b, Real dt) {
  const Vec d = (u_b - u_a) / dt;
  return 0.5 * d.dot(sys.apply_mass(d)) + 0.5 * u_b.dot(sys.apply_stiffness(u_a));
}

// spectral_lambda_max (Lanczos bound for the M^{-1} S pencil) lives in
// gmswave/lanczos.hpp, shared with the trace-constant estimator.

struct StabilityReport {
  Real dt_requested = 0;
  Real dt_max_spectral = 0;  ///< 2/sqrt(lambda_max), authoritative
  Real dt_max_paper = 0;     ///< 2*sqrt(beta(h)), reported for comparison
  Real lambda_max = 0;
  bool spectral_converged = false;
  bool accept = false;
  Real safety = 0.95;
};

/// Compares the requested step against the spectral bound (with safety
/// factor); beta_h <= 0 marks the formula bound as unavailable.
template <class System>
StabilityReport stability_guard(const System& sys, const TimeGrid& grid, Real beta_h) {
  StabilityReport rep;
  rep.dt_requested = grid.dt;
  auto [lambda, ok] = spectral_lambda_max(sys);
  rep.lambda_max = lambda;
  rep.spectral_converged = ok;
  rep.dt_max_spectral = lambda > 0 ? 2.0 / std::sqrt(lambda) : std::numeric_limits<Real>::infinity();
  rep.dt_max_paper = beta_h > 0 ? 2.0 * std::sqrt(beta_h) : 0;
  if (ok)
    rep.accept = grid.dt <= rep.safety * rep.dt_max_spectral;
  else
    rep.accept = rep.dt_max_paper > 0 && grid.dt <= rep.safety * rep.dt_max_paper;
  return rep;
}

}  // namespace gmswave

#endif
