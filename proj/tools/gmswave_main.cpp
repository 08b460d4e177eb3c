#include "gmswave/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace gmswave;

namespace {

struct CliState {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    return cfg;
  }
};

void add_common_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "flat key-value config file");
  auto kv = [&state](const std::string& key) {
    return [&state, key](const std::string& v) { state.overrides.emplace_back(key, v); };
  };
  auto square = [&state](const std::string& kx, const std::string& ky) {
    return [&state, kx, ky](const std::string& v) {
      state.overrides.emplace_back(kx, v);
      state.overrides.emplace_back(ky, v);
    };
  };
  cmd->add_option_function<std::string>("--nx", kv("nx"), "fine cells along x");
  cmd->add_option_function<std::string>("--ny", kv("ny"), "fine cells along y");
  cmd->add_option_function<std::string>("-n,--cells", square("nx", "ny"), "fine cells per axis");
  cmd->add_option_function<std::string>("--blocks-x", kv("blocks_x"), "coarse blocks along x");
  cmd->add_option_function<std::string>("--blocks-y", kv("blocks_y"), "coarse blocks along y");
  cmd->add_option_function<std::string>("-b,--blocks", square("blocks_x", "blocks_y"),
                                        "coarse blocks per axis");
  cmd->add_option_function<std::string>(
      "--media", kv("media"), "raster path or synth:periodic:<bg>:<contrast>:<period>");
  cmd->add_option_function<std::string>("--T", kv("T"), "final time");
  cmd->add_option_function<std::string>("--dt", kv("dt"), "explicit time step");
  cmd->add_flag_callback(
      "--dt-auto", [&state] { state.overrides.emplace_back("dt_auto", "1"); },
      "use 0.9x of the spectral stability bound");
  cmd->add_flag_callback(
      "--force", [&state] { state.overrides.emplace_back("force", "1"); },
      "run despite a rejecting stability verdict");
  cmd->add_option_function<std::string>("--source", kv("source"), "ricker | none | manufactured");
  cmd->add_option_function<std::string>("--f0", kv("f0"), "wavelet center frequency");
  cmd->add_option_function<std::string>("--gamma", kv("gamma"), "interior penalty parameter");
  cmd->add_option_function<std::string>("--penalty-scale", kv("penalty_scale"),
                                        "penalty length scale: h (default) or H (experimental)");
  cmd->add_option_function<std::string>("--energy", kv("theta"),
                                        "boundary-mode energy fraction theta");
  cmd->add_option_function<std::string>("--interior", kv("interior_m"),
                                        "interior modes per block");
  cmd->add_option_function<std::string>("--oversample", kv("oversample"),
                                        "snapshot oversampling in fine cells (-1 off)");
  cmd->add_option_function<std::string>("--bank", kv("bank"), "load the offline bank from a file");
  cmd->add_option_function<std::string>("--outdir", kv("outdir"), "output directory");
  cmd->add_option_function<std::string>("--probes", kv("probes"), "comma-separated probe times");
  cmd->add_option_function<std::string>("--dump-every", kv("dump_every"),
                                        "dump a field snapshot every k steps");
  cmd->add_option_function<std::string>("--dump-matrix", kv("dump_matrix"),
                                        "write operators in coordinate text form");
  cmd->add_flag_callback(
      "--lump-fine-mass", [&state] { state.overrides.emplace_back("lump_fine_mass", "1"); },
      "diagonal (row-sum) fine mass");
  cmd->add_option_function<std::string>("--seed", kv("seed"), "seed for randomized verifiers");
  cmd->add_option_function<std::string>("--threads", kv("threads"), "worker threads (0 = auto)");
}

void dump_nodal(const RunConfig& cfg, const Problem& prob, const std::string& name,
                const Vec& nodal) {
  if (cfg.outdir.empty()) return;
  std::filesystem::create_directories(cfg.outdir);
  save_raster(cfg.outdir + "/" + name, prob.fine.nx + 1, prob.fine.ny + 1, cfg.extent_x,
              cfg.extent_y, nodal);
}

void print_stability(const StabilityReport& rep) {
  std::printf("stability: dt = %.6g, spectral dt_max = %.6g, formula dt_max = %.6g -> %s\n",
              rep.dt_requested, rep.dt_max_spectral, rep.dt_max_paper,
              rep.accept ? "accepted" : "REJECTED");
}

void print_report(const ErrorReport& r) {
  std::printf("theta %.4g  basis %d-%d  m %d\n", r.theta, r.p_min, r.p_max, r.m);
  std::printf("e2 %.4e   e2_bar %.4e   eH1 %.4e   eJump %.4e\n", r.e2, r.e2_bar, r.eH1, r.eJump);
  std::printf("mu_min %.4g   lambda_min %.4g\n", r.mu_min, r.lambda_min);
  std::printf("t_off %.2fs   t_on %.2fs   t_fine %.2fs\n", r.t_off, r.t_on, r.t_fine);
}

int cmd_run_fine(const RunConfig& cfg) {
  const Problem prob = setup_problem(cfg);
  const FineRun run = run_fine(cfg, prob);
  print_stability(run.stability);
  std::printf("fine solve: %lld steps, loop %.2fs\n", static_cast<long long>(run.grid.steps),
              run.t_loop);
  dump_nodal(cfg, prob, "fine_final.f64", run.full_final);
  for (const auto& [step, field] : run.probe_fields)
    dump_nodal(cfg, prob, "fine_step_" + std::to_string(step) + ".f64", field);
  return 0;
}

int cmd_basis_build(const RunConfig& cfg, const std::string& out_path) {
  const Problem prob = setup_problem(cfg);
  std::optional<int> over;
  if (cfg.oversample >= 0) over = cfg.oversample;
  const LocalBasisBank bank = build_bank(prob.fine, prob.coarse, prob.field, cfg.theta,
                                         cfg.interior_m, over, cfg.resolved_threads());
  int p_min = bank.blocks.front().p, p_max = p_min;
  for (const BlockBasis& bb : bank.blocks) {
    p_min = std::min(p_min, bb.p);
    p_max = std::max(p_max, bb.p);
  }
  save_bank(bank, out_path);
  std::printf("bank: %zu blocks, p in [%d, %d], m %d, %d dofs, t_off %.2fs -> %s\n",
              bank.blocks.size(), p_min, p_max, cfg.interior_m, bank.total_dofs(), bank.t_offline,
              out_path.c_str());
  return 0;
}

int cmd_run_gmsfem(const RunConfig& cfg, const std::string& save_bank_path) {
  const Problem prob = setup_problem(cfg);
  const CoarseRun run = run_gmsfem(cfg, prob);
  print_stability(run.stability);
  std::printf("offline: t_bank %.2fs + t_assembly %.2fs; online loop %.2fs (%lld steps)\n",
              run.bank.t_offline, run.t_assembly, run.t_loop,
              static_cast<long long>(run.grid.steps));
  std::printf("trace constant: %.4g (safe %.4g)\n", run.trace.raw, run.trace.safe);
  if (!save_bank_path.empty()) save_bank(run.bank, save_bank_path);

  const BrokenField u = expand(run.final_state, run.bank, prob.coarse);
  dump_nodal(cfg, prob, "gmsfem_final.f64", conforming_average(u, prob.fine, prob.coarse));
  for (const auto& [step, state] : run.probe_states) {
    CoarseState st;
    st.coeffs = state;
    const BrokenField bf = expand(st, run.bank, prob.coarse);
    dump_nodal(cfg, prob, "gmsfem_step_" + std::to_string(step) + ".f64",
               conforming_average(bf, prob.fine, prob.coarse));
  }
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  const CompareResult res = run_compare(cfg);
  print_report(res.report);
  if (!cfg.outdir.empty()) std::printf("report written to %s/report.txt\n", cfg.outdir.c_str());
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& param, const std::string& values_csv) {
  SweepParam sp;
  if (param == "m" || param == "interior")
    sp = SweepParam::interior_m;
  else if (param == "energy" || param == "theta")
    sp = SweepParam::energy;
  else
    throw ConfigError("sweep param must be 'm' or 'energy'");

  std::vector<Real> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) values.push_back(std::stod(item));

  const auto rows = run_sweep(cfg, sp, values);
  if (sp == SweepParam::interior_m) {
    std::printf("%4s  %10s  %10s  %10s  %12s  %12s\n", "m", "e2", "e2_bar", "eH1", "eJump",
                "lambda_min");
    for (const ErrorReport& r : rows)
      std::printf("%4d  %10.4e  %10.4e  %10.4e  %12.4e  %12.4e\n", r.m, r.e2, r.e2_bar, r.eH1,
                  r.eJump, r.lambda_min);
  } else {
    std::printf("%7s  %7s  %10s  %10s  %10s  %12s  %10s\n", "energy", "basis", "e2", "e2_bar",
                "eH1", "eJump", "mu_min");
    for (const ErrorReport& r : rows) {
      char basis[32];
      std::snprintf(basis, sizeof basis, "%d-%d", r.p_min, r.p_max);
      std::printf("%6.0f%%  %7s  %10.4e  %10.4e  %10.4e  %12.4e  %10.4g\n", 100 * r.theta, basis,
                  r.e2, r.e2_bar, r.eH1, r.eJump, r.mu_min);
    }
  }
  std::printf("\n%7s  %10s  %10s\n", "row", "t_off", "t_on");
  for (size_t i = 0; i < rows.size(); ++i)
    std::printf("%7zu  %10.2f  %10.2f\n", i, rows[i].t_off, rows[i].t_on);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GMsFEM wave simulator: fine reference solver, multiscale basis "
               "construction, IPDG coarse solver, and experiment harness"};
  app.require_subcommand(1);

  CliState state;
  std::string bank_out = "bank.msb";
  std::string save_bank_path;
  std::string sweep_param = "m";
  std::string sweep_values = "1,2,3,5";

  CLI::App* c_fine = app.add_subcommand("run-fine", "fine-grid reference solve");
  add_common_options(c_fine, state);
  CLI::App* c_basis = app.add_subcommand("basis", "offline basis operations");
  CLI::App* c_build = c_basis->add_subcommand("build", "build and save a basis bank");
  add_common_options(c_build, state);
  c_build->add_option("-o,--out", bank_out, "bank output path");
  CLI::App* c_gms = app.add_subcommand("run-gmsfem", "coarse multiscale solve");
  add_common_options(c_gms, state);
  c_gms->add_option("--save-bank", save_bank_path, "save the built bank to a file");
  CLI::App* c_cmp = app.add_subcommand("compare", "fine + coarse run with error metrics");
  add_common_options(c_cmp, state);
  CLI::App* c_ver = app.add_subcommand("verify", "run the property verifier suites");
  add_common_options(c_ver, state);
  CLI::App* c_swp = app.add_subcommand("sweep", "parameter sweep over a shared offline stage");
  add_common_options(c_swp, state);
  c_swp->add_option("--param", sweep_param, "m | energy");
  c_swp->add_option("--values", sweep_values, "comma-separated values");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = state.resolve();
    if (c_fine->parsed()) return cmd_run_fine(cfg);
    if (c_build->parsed()) return cmd_basis_build(cfg, bank_out);
    if (c_gms->parsed()) return cmd_run_gmsfem(cfg, save_bank_path);
    if (c_cmp->parsed()) return cmd_compare(cfg);
    if (c_ver->parsed()) return run_verifiers(cfg) == 0 ? 0 : 1;
    if (c_swp->parsed()) return cmd_sweep(cfg, sweep_param, sweep_values);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
