#include "gmswave/harness.hpp"

#include "gmswave/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gmswave {

namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

std::vector<Real> parse_time_list(const std::string& csv) {
  std::vector<Real> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::vector<std::int64_t> probe_step_list(const RunConfig& cfg, const TimeGrid& grid) {
  std::vector<std::int64_t> steps;
  for (Real t : parse_time_list(cfg.probes)) {
    const std::int64_t n = grid.step_of(t);
    if (n < 0 || n > grid.steps)
      throw ConfigError("probe time " + std::to_string(t) + " outside [0, T]");
    steps.push_back(n);
  }
  if (cfg.dump_every > 0)
    for (std::int64_t n = 0; n <= grid.steps; n += cfg.dump_every) steps.push_back(n);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

/// Full-grid nodal interpolant of a scalar function.
Vec interpolate_nodal(const FineMesh& fine, const std::function<Real(Real, Real)>& f) {
  Vec v = Vec::Zero(fine.node_count());
  if (!f) return v;
  for (int j = 0; j <= fine.ny; ++j)
    for (int i = 0; i <= fine.nx; ++i) v[fine.node_id(i, j)] = f(fine.node_x(i), fine.node_y(j));
  return v;
}

Vec restrict_free(const Vec& full, const DirichletMap& dmap) {
  Vec out(dmap.free_count());
  for (int k = 0; k < dmap.free_count(); ++k) out[k] = full[dmap.node_of_free[k]];
  return out;
}

Vec expand_free(const Vec& free_values, const DirichletMap& dmap, const FineMesh& fine) {
  Vec out = Vec::Zero(fine.node_count());
  for (int k = 0; k < dmap.free_count(); ++k) out[dmap.node_of_free[k]] = free_values[k];
  return out;
}

TimeGrid resolve_grid(const RunConfig& cfg, const FineMesh& fine, Real dt_spectral_max) {
  if (cfg.dt > 0) return TimeGrid::from_step(cfg.T, cfg.dt);
  if (cfg.dt_auto) {
    if (!(dt_spectral_max > 0)) throw InternalError("auto dt requested without a spectral bound");
    return TimeGrid::fit(cfg.T, 0.9 * dt_spectral_max);
  }
  return TimeGrid::from_step(cfg.T, fine.h / 80.0);
}

void require_stable(const StabilityReport& rep, bool force) {
  if (rep.accept || force) return;
  std::ostringstream ss;
  ss << "dt = " << rep.dt_requested << " rejected by the stability guard (spectral dt_max = "
     << rep.dt_max_spectral << ", formula dt_max = " << rep.dt_max_paper
     << "); use --force to override";
  throw ConfigError(ss.str());
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string key, value;
    if (!(ss >> key)) continue;
    if (!(ss >> value))
      throw ConfigError(path + ":" + std::to_string(line_no) + ": key '" + key + "' has no value");
    cfg.set(key, value);
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "nx") nx = std::stoi(value);
  else if (key == "ny") ny = std::stoi(value);
  else if (key == "blocks_x") blocks_x = std::stoi(value);
  else if (key == "blocks_y") blocks_y = std::stoi(value);
  else if (key == "extent_x") extent_x = std::stod(value);
  else if (key == "extent_y") extent_y = std::stod(value);
  else if (key == "media") media = value;
  else if (key == "theta") theta = std::stod(value);
  else if (key == "interior_m") interior_m = std::stoi(value);
  else if (key == "gamma") gamma = std::stod(value);
  else if (key == "oversample") oversample = std::stoi(value);
  else if (key == "penalty_scale") penalty_scale = value;
  else if (key == "T") T = std::stod(value);
  else if (key == "dt") dt = std::stod(value);
  else if (key == "dt_auto") dt_auto = parse_bool(value);
  else if (key == "force") force = parse_bool(value);
  else if (key == "lump_fine_mass") lump_fine_mass = parse_bool(value);
  else if (key == "source") source = value;
  else if (key == "f0") f0 = std::stod(value);
  else if (key == "src_cx") src_cx = std::stod(value);
  else if (key == "src_cy") src_cy = std::stod(value);
  else if (key == "src_decay") src_decay = std::stod(value);
  else if (key == "src_amplitude") src_amplitude = std::stod(value);
  else if (key == "src_radius") src_radius = std::stod(value);
  else if (key == "outdir") outdir = value;
  else if (key == "bank") bank_path = value;
  else if (key == "probes") probes = value;
  else if (key == "dump_every") dump_every = std::stoi(value);
  else if (key == "dump_matrix") dump_matrix = value;
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "threads") threads = std::stoi(value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::resolved_text() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "nx " << nx << "\nny " << ny << "\nblocks_x " << blocks_x << "\nblocks_y " << blocks_y
     << "\nextent_x " << extent_x << "\nextent_y " << extent_y << "\nmedia " << media << "\ntheta "
     << theta << "\ninterior_m " << interior_m << "\ngamma " << gamma << "\noversample "
     << oversample << "\npenalty_scale " << penalty_scale << "\nT " << T << "\ndt " << dt
     << "\ndt_auto " << dt_auto << "\nforce " << force << "\nlump_fine_mass " << lump_fine_mass
     << "\nsource " << source << "\nf0 " << f0 << "\nsrc_cx " << src_cx << "\nsrc_cy " << src_cy
     << "\nsrc_decay " << src_decay << "\nsrc_amplitude " << src_amplitude << "\nsrc_radius "
     << src_radius << "\nseed " << seed
     << "\n";
  if (!bank_path.empty()) ss << "bank " << bank_path << "\n";
  return ss.str();
}

int RunConfig::resolved_threads() const {
  return threads > 0 ? threads : default_thread_count();
}

SourceSpec RunConfig::source_spec() const {
  SourceSpec spec;
  spec.f0 = f0;
  spec.cx = src_cx;
  spec.cy = src_cy;
  spec.decay = src_decay;
  spec.amplitude = src_amplitude;
  spec.radius = src_radius;
  if (source == "ricker") {
    spec.kind = SourceKind::ricker;
  } else if (source == "none") {
    spec.kind = SourceKind::none;
  } else if (source == "manufactured") {
    spec.kind = SourceKind::manufactured;
    spec.g0 = [](Real x, Real y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
  } else if (source == "bump") {
    // source-free run from a compactly supported initial displacement
    spec.kind = SourceKind::bump;
    const Real cx = spec.cx, cy = spec.cy, r = spec.radius, amp = spec.amplitude;
    spec.g0 = [cx, cy, r, amp](Real x, Real y) {
      const Real q = 1.0 - ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (r * r);
      return q > 0 ? amp * q * q * q : 0.0;
    };
  } else {
    throw ConfigError("unknown source '" + source + "'");
  }
  return spec;
}

Problem setup_problem(const RunConfig& cfg) {
  Problem prob;
  auto [fine, coarse] = build_hierarchy(cfg.nx, cfg.ny, cfg.blocks_x, cfg.blocks_y, cfg.extent_x,
                                        cfg.extent_y);
  prob.fine = std::move(fine);
  prob.coarse = std::move(coarse);
  prob.field = media_from_spec(cfg.media, prob.fine);
  return prob;
}

FineRun run_fine(const RunConfig& cfg, const Problem& prob) {
  const auto [stiff, mass] = assemble_global(prob.fine, prob.field, true);
  if (!cfg.dump_matrix.empty()) dump_matrix_coord(stiff.matrix, cfg.dump_matrix);

  const DirichletMap dmap = boundary_dirichlet_map(prob.fine);
  FineWaveSystem sys(stiff.matrix, mass.matrix, cfg.lump_fine_mass);

  const SourceSpec src = cfg.source_spec();
  if (src.has_source()) {
    const Vec s_full = interpolate_nodal(prob.fine, [&](Real x, Real y) { return src.spatial(x, y); });
    sys.set_load(mass.matrix * restrict_free(s_full, dmap),
                 [src](Real t) { return src.time_factor(t); });
  }

  Real dt_max = 0;
  if (cfg.dt_auto && cfg.dt <= 0) {
    const auto [lambda, ok] = spectral_lambda_max(sys);
    if (!ok) throw InternalError("fine spectral bound did not converge");
    dt_max = 2.0 / std::sqrt(lambda);
  }
  FineRun out;
  out.grid = resolve_grid(cfg, prob.fine, dt_max);
  out.stability = stability_guard(sys, out.grid, 0.0);
  require_stable(out.stability, cfg.force);

  const Vec u0 = restrict_free(interpolate_nodal(prob.fine, src.g0), dmap);
  const Vec v0 = restrict_free(interpolate_nodal(prob.fine, src.g1), dmap);
  auto [a, b] = init_states(sys, u0, v0, out.grid.dt);
  const auto res = leapfrog_run(sys, std::move(a), std::move(b), out.grid,
                                probe_step_list(cfg, out.grid));
  out.t_loop = res.t_online;
  out.full_final = expand_free(res.u_final, dmap, prob.fine);
  out.full_prev = expand_free(res.u_prev, dmap, prob.fine);
  out.probe_fields.reserve(res.probes.size());
  for (const auto& [n, u] : res.probes) out.probe_fields.emplace_back(n, expand_free(u, dmap, prob.fine));
  return out;
}

CoarseRun run_gmsfem_with_bank(const RunConfig& cfg, const Problem& prob, LocalBasisBank bank) {
  CoarseRun out;
  out.bank = std::move(bank);
  out.trace = estimate_trace_constant(prob.fine, prob.coarse, prob.field);

  DGParams params;
  params.gamma = cfg.gamma;
  params.lambda_trace = out.trace.safe;
  if (cfg.penalty_scale == "H")
    params.penalty_scale_H = true;
  else if (cfg.penalty_scale != "h")
    throw ConfigError("penalty_scale must be 'h' or 'H'");

  const auto t0 = Clock::now();
  out.system = assemble_adg(out.bank, prob.fine, prob.coarse, prob.field, params,
                            cfg.resolved_threads());
  assemble_mass(out.system, out.bank, prob.fine, prob.coarse);
  out.t_assembly = seconds_since(t0);
  if (!cfg.dump_matrix.empty()) dump_matrix_coord(out.system.stiffness, cfg.dump_matrix + ".dg");

  CoarseWaveSystem wave(out.system);
  const SourceSpec src = cfg.source_spec();
  if (src.has_source()) {
    const Vec s_full = interpolate_nodal(prob.fine, [&](Real x, Real y) { return src.spatial(x, y); });
    wave.set_load(assemble_load(out.system, out.bank, prob.fine, prob.coarse, s_full),
                  [src](Real t) { return src.time_factor(t); });
  }

  Real dt_max = 0;
  if (cfg.dt_auto && cfg.dt <= 0) {
    const auto [lambda, ok] = spectral_lambda_max(wave);
    if (!ok) throw InternalError("coarse spectral bound did not converge");
    dt_max = 2.0 / std::sqrt(lambda);
  }
  out.grid = resolve_grid(cfg, prob.fine, dt_max);
  out.stability = stability_guard(wave, out.grid,
                                  beta_paper(prob.fine.h, prob.field.a1, cfg.gamma, out.trace.safe));
  require_stable(out.stability, cfg.force);

  const CoarseState c0 = l2_project(interpolate_nodal(prob.fine, src.g0), out.system, out.bank,
                                    prob.fine, prob.coarse);
  const CoarseState c1 = l2_project(interpolate_nodal(prob.fine, src.g1), out.system, out.bank,
                                    prob.fine, prob.coarse);
  auto [a, b] = init_states(wave, c0.coeffs, c1.coeffs, out.grid.dt);
  auto res = leapfrog_run(wave, std::move(a), std::move(b), out.grid,
                          probe_step_list(cfg, out.grid));
  out.t_loop = res.t_online;
  out.final_state = {std::move(res.u_final), out.grid.T};
  out.prev_state = {std::move(res.u_prev), out.grid.T - out.grid.dt};
  out.probe_states = std::move(res.probes);
  return out;
}

CoarseRun run_gmsfem(const RunConfig& cfg, const Problem& prob) {
  LocalBasisBank bank;
  if (!cfg.bank_path.empty()) {
    bank = load_bank(cfg.bank_path);
  } else {
    std::optional<int> over;
    if (cfg.oversample >= 0) over = cfg.oversample;
    bank = build_bank(prob.fine, prob.coarse, prob.field, cfg.theta, cfg.interior_m, over,
                      cfg.resolved_threads());
  }
  return run_gmsfem_with_bank(cfg, prob, std::move(bank));
}

CompareResult run_compare(const RunConfig& cfg) {
  const Problem prob = setup_problem(cfg);

  CompareResult res;
  RunConfig run_cfg = cfg;
  if (cfg.dt_auto && cfg.dt <= 0) {
    // One step size serves both solvers; take the binding spectral bound.
    const auto [stiff, mass] = assemble_global(prob.fine, prob.field, true);
    FineWaveSystem probe(stiff.matrix, mass.matrix, cfg.lump_fine_mass);
    const auto [lambda_fine, ok_fine] = spectral_lambda_max(probe);
    if (!ok_fine) throw InternalError("fine spectral bound did not converge");
    res.coarse = run_gmsfem(run_cfg, prob);
    const Real dt_max =
        std::min(2.0 / std::sqrt(lambda_fine), res.coarse.stability.dt_max_spectral);
    run_cfg.dt = TimeGrid::fit(cfg.T, 0.9 * dt_max).dt;
    // Re-run the online stage on the shared grid with the bank already built.
    res.coarse = run_gmsfem_with_bank(run_cfg, prob, std::move(res.coarse.bank));
  } else {
    res.coarse = run_gmsfem(run_cfg, prob);
  }

  const auto t0 = Clock::now();
  res.fine = run_fine(run_cfg, prob);
  const Real t_fine_total = seconds_since(t0);

  if (res.fine.grid.steps != res.coarse.grid.steps)
    throw InternalError("fine and coarse runs disagree on the time grid");

  const BrokenField u_coarse = expand(res.coarse.final_state, res.coarse.bank, prob.coarse);
  res.report = compute_errors(u_coarse, res.fine.full_final, prob.fine, prob.coarse, prob.field);
  fill_bank_metadata(res.report, res.coarse.bank);
  res.report.gamma = cfg.gamma;
  res.report.t_off = res.coarse.bank.t_offline + res.coarse.t_assembly;
  res.report.t_on = res.coarse.t_loop;
  res.report.t_fine = t_fine_total;

  if (!cfg.outdir.empty()) {
    std::filesystem::create_directories(cfg.outdir);
    write_report_kv(res.report, cfg.outdir + "/report.txt", run_cfg.resolved_text());
    append_report_csv(res.report, cfg.outdir + "/results.csv");
    save_raster(cfg.outdir + "/fine_final.f64", prob.fine.nx + 1, prob.fine.ny + 1, cfg.extent_x,
                cfg.extent_y, res.fine.full_final);
    save_raster(cfg.outdir + "/gmsfem_final.f64", prob.fine.nx + 1, prob.fine.ny + 1, cfg.extent_x,
                cfg.extent_y, conforming_average(u_coarse, prob.fine, prob.coarse));
  }
  return res;
}

std::vector<ErrorReport> run_sweep(const RunConfig& cfg, SweepParam param,
                                   const std::vector<Real>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const Problem prob = setup_problem(cfg);

  RunConfig build_cfg = cfg;
  if (param == SweepParam::interior_m) {
    int m_max = 0;
    for (Real v : values) m_max = std::max(m_max, static_cast<int>(std::llround(v)));
    build_cfg.interior_m = m_max;
  } else {
    build_cfg.theta = *std::max_element(values.begin(), values.end());
  }

  LocalBasisBank bank;
  if (!cfg.bank_path.empty()) {
    bank = load_bank(cfg.bank_path);
  } else {
    std::optional<int> over;
    if (cfg.oversample >= 0) over = cfg.oversample;
    bank = build_bank(prob.fine, prob.coarse, prob.field, build_cfg.theta, build_cfg.interior_m,
                      over, cfg.resolved_threads());
  }

  RunConfig row_cfg = cfg;
  row_cfg.dt_auto = false;

  const auto t_fine0 = Clock::now();
  FineRun fine = run_fine(row_cfg, prob);
  const Real t_fine_total = seconds_since(t_fine0);
  row_cfg.dt = fine.grid.dt;

  if (!cfg.outdir.empty()) std::filesystem::create_directories(cfg.outdir);

  std::vector<ErrorReport> rows;
  for (Real v : values) {
    Real row_theta = cfg.theta;
    int row_m = cfg.interior_m;
    if (param == SweepParam::interior_m)
      row_m = static_cast<int>(std::llround(v));
    else
      row_theta = v;

    CoarseRun coarse = run_gmsfem_with_bank(row_cfg, prob, slice_bank(bank, row_theta, row_m));
    const BrokenField u_coarse = expand(coarse.final_state, coarse.bank, prob.coarse);
    ErrorReport rep = compute_errors(u_coarse, fine.full_final, prob.fine, prob.coarse, prob.field);
    fill_bank_metadata(rep, coarse.bank);
    rep.gamma = cfg.gamma;
    rep.t_off = bank.t_offline + coarse.t_assembly;
    rep.t_on = coarse.t_loop;
    rep.t_fine = t_fine_total;
    if (!cfg.outdir.empty()) append_report_csv(rep, cfg.outdir + "/results.csv");
    rows.push_back(std::move(rep));
  }
  return rows;
}

}  // namespace gmswave
