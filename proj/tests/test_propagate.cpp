#include "gmswave/propagate.hpp"

#include "doctest.h"
#include "gmswave/harness.hpp"
#include "oracles.hpp"

using namespace gmswave;

namespace {

/// One-dof surrogate: unit mass, stiffness omega^2.
struct ScalarSystem {
  Real stiff = 1.0;
  Eigen::Index dim() const { return 1; }
  Vec apply_stiffness(const Vec& x) const { return stiff * x; }
  Vec apply_mass(const Vec& x) const { return x; }
  void solve_mass_inplace(Vec&) const {}
  void subtract_load(Real, Vec&) const {}
};

}  // namespace

TEST_CASE("ricker wavelet values") {
  SourceSpec spec;
  spec.kind = SourceKind::ricker;
  const Real t_peak = 2.0 / spec.f0;

  CHECK(ricker_eval(0.5, 0.5, t_peak, spec) == doctest::Approx(100.0));
  const Real root = t_peak + 1.0 / (std::sqrt(2.0) * M_PI * spec.f0);
  CHECK(ricker_eval(0.5, 0.5, root, spec) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ricker_eval(0.5 + 0.07, 0.5, 0.03, spec) ==
        doctest::Approx(ricker_eval(0.5 - 0.07, 0.5, 0.03, spec)));
  SourceSpec none;
  CHECK(ricker_eval(0.5, 0.5, t_peak, none) == 0.0);
}

TEST_CASE("time grid construction") {
  const TimeGrid g = TimeGrid::from_step(0.2, 1.0 / 20480.0);
  CHECK(g.steps == 4096);
  CHECK_THROWS_AS(TimeGrid::from_step(0.2, 0.0301), ConfigError);
  const TimeGrid f = TimeGrid::fit(1.0, 0.3);
  CHECK(f.steps == 4);
  CHECK(f.dt == doctest::Approx(0.25));
  CHECK(f.dt <= 0.3);
}

TEST_CASE("scalar surrogate: initialization and one recurrence step") {
  ScalarSystem sys;
  Vec g0(1), g1(1);
  g0 << 1.0;
  g1 << 0.0;
  const Real dt = 0.1;
  auto [u0, u1] = init_states(sys, g0, g1, dt);
  CHECK(u1[0] == doctest::Approx(0.995));

  TimeGrid grid;
  grid.dt = dt;
  grid.steps = 2;
  grid.T = 0.2;
  const auto res = leapfrog_run(sys, u0, u1, grid);
  CHECK(res.u_final[0] == doctest::Approx(0.98005));
  CHECK(res.steps_done == 2);
}

TEST_CASE("scalar surrogate: spectral bound") {
  ScalarSystem sys;
  const auto [lambda, ok] = spectral_lambda_max(sys);
  CHECK(ok);
  CHECK(lambda == doctest::Approx(1.0));
  TimeGrid grid;
  grid.dt = 1.0;
  grid.steps = 10;
  grid.T = 10.0;
  const StabilityReport rep = stability_guard(sys, grid, 0.0);
  CHECK(rep.dt_max_spectral == doctest::Approx(2.0));
  CHECK(rep.accept);
}

TEST_CASE("null evolution stays zero") {
  ScalarSystem sys;
  TimeGrid grid;
  grid.dt = 0.1;
  grid.steps = 50;
  grid.T = 5.0;
  const auto res = leapfrog_run(sys, Vec::Zero(1), Vec::Zero(1), grid);
  CHECK(res.u_final[0] == 0.0);
}

TEST_CASE("beta(h) arithmetic at the reference parameters") {
  const Real h = 1.0 / 512;
  const Real beta = beta_paper(h, 1.0, 2.0, 4.0);
  CHECK(beta == doctest::Approx(h * h / 166.851).epsilon(1e-4));
  CHECK(2.0 * std::sqrt(beta) == doctest::Approx(2.0 * h / 12.917).epsilon(1e-3));
}

TEST_CASE("fine system: energy conservation and time reversal") {
  RunConfig cfg;
  cfg.nx = cfg.ny = 16;
  cfg.blocks_x = cfg.blocks_y = 2;
  cfg.media = "synth:periodic:1:10:4";
  const Problem prob = setup_problem(cfg);
  const auto [stiff, mass] = assemble_global(prob.fine, prob.field, true);
  FineWaveSystem sys(stiff.matrix, mass.matrix);

  const auto [lambda, ok] = spectral_lambda_max(sys);
  REQUIRE(ok);
  TimeGrid grid;
  grid.dt = 0.9 * 2.0 / std::sqrt(lambda);
  grid.steps = 1000;
  grid.T = grid.dt * 1000;

  Vec g0(sys.dim());
  for (int i = 0; i < g0.size(); ++i) g0[i] = std::sin(0.1 * i) + 0.3;
  auto [u0, u1] = init_states(sys, g0, Vec::Zero(sys.dim()), grid.dt);

  const Real e0 = leapfrog_energy(sys, u0, u1, grid.dt);
  const auto fwd = leapfrog_run(sys, u0, u1, grid);
  const Real e1 = leapfrog_energy(sys, fwd.u_prev, fwd.u_final, grid.dt);
  CHECK(std::abs(e1 - e0) <= 1e-10 * std::abs(e0));

  // reversed recurrence returns to the initial pair
  const auto bwd = leapfrog_run(sys, fwd.u_final, fwd.u_prev, grid);
  CHECK((bwd.u_final - u0).norm() <= 1e-8 * u0.norm());
}

TEST_CASE("instability beyond the spectral bound is detected") {
  RunConfig cfg;
  cfg.nx = cfg.ny = 8;
  cfg.blocks_x = cfg.blocks_y = 2;
  cfg.media = "synth:periodic:1:1:2";
  const Problem prob = setup_problem(cfg);
  const auto [stiff, mass] = assemble_global(prob.fine, prob.field, true);
  FineWaveSystem sys(stiff.matrix, mass.matrix);
  const auto [lambda, ok] = spectral_lambda_max(sys);
  REQUIRE(ok);

  TimeGrid grid;
  grid.dt = 1.2 * 2.0 / std::sqrt(lambda);
  grid.steps = 500;
  grid.T = grid.dt * 500;
  const StabilityReport rep = stability_guard(sys, grid, 0.0);
  CHECK_FALSE(rep.accept);

  Vec u0(sys.dim());
  for (int i = 0; i < u0.size(); ++i) u0[i] = 1e-3 * std::cos(1.7 * i);
  LeapfrogOptions opts;
  opts.check_every = 1;
  opts.abort_norm = 1e3 * u0.norm();
  const auto res = leapfrog_run(sys, u0, u0, grid, {}, opts);
  CHECK(res.aborted);
  CHECK(res.abort_step <= 500);
}

TEST_CASE("manufactured solution: second-order convergence at fixed dt/h") {
  // u = sin(pi x) sin(pi y) cos(sqrt(2) pi t) solves the unit-coefficient
  // equation with f = 0.
  auto error_at = [](int n) {
    RunConfig cfg;
    cfg.nx = cfg.ny = n;
    cfg.blocks_x = cfg.blocks_y = 1;
    cfg.media = "synth:periodic:1:1:2";
    cfg.source = "manufactured";
    cfg.T = 0.25;
    const Problem prob = setup_problem(cfg);
    cfg.dt = prob.fine.h / 80.0;
    const FineRun run = run_fine(cfg, prob);

    Real num = 0, den = 0;
    const Real factor = std::cos(std::sqrt(2.0) * M_PI * cfg.T);
    Vec exact(prob.fine.node_count());
    for (int j = 0; j <= prob.fine.ny; ++j)
      for (int i = 0; i <= prob.fine.nx; ++i)
        exact[prob.fine.node_id(i, j)] = factor * std::sin(M_PI * prob.fine.node_x(i)) *
                                         std::sin(M_PI * prob.fine.node_y(j));
    const Vec diff = run.full_final - exact;
    num = oracles::l2sq_quadrature(prob.fine, diff);
    den = oracles::l2sq_quadrature(prob.fine, exact);
    return std::sqrt(num / den);
  };

  const Real e16 = error_at(16);
  const Real e32 = error_at(32);
  const Real order = std::log2(e16 / e32);
  CHECK(order == doctest::Approx(2.0).epsilon(0.25));
}
