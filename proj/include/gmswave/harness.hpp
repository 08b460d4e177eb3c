#ifndef GMSWAVE_HARNESS_HPP
#define GMSWAVE_HARNESS_HPP

#include "gmswave/ipdg.hpp"
#include "gmswave/media.hpp"
#include "gmswave/mesh.hpp"
#include "gmswave/metrics.hpp"
#include "gmswave/msbasis.hpp"
#include "gmswave/propagate.hpp"
#include "gmswave/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gmswave {

/// Fully-resolved run parameters. File format: flat `key value` lines with
/// `#` comments; CLI flags override file entries.
struct RunConfig {
  int nx = 256, ny = 256;
  int blocks_x = 8, blocks_y = 8;
  Real extent_x = 1.0, extent_y = 1.0;
  std::string media = "synth:periodic:1:100:16";

  Real theta = 0.75;
  int interior_m = 1;
  Real gamma = 2.0;
  int oversample = -1;  ///< -1: off; >= 0: oversampled snapshots
  std::string penalty_scale = "h";

  Real T = 0.2;
  Real dt = 0;          ///< explicit step; 0 defers to the policy below
  bool dt_auto = false; ///< 0.9x spectral bound when set; else dt = h/80
  bool force = false;   ///< run despite a rejecting stability verdict
  bool lump_fine_mass = false;

  std::string source = "ricker";  ///< ricker | none
  Real f0 = 20.0;
  Real src_cx = 0.5, src_cy = 0.5;
  Real src_decay = 100.0;
  Real src_amplitude = 100.0;
  Real src_radius = 0.125;

  std::string outdir = "out";
  std::string bank_path;  ///< nonempty: load the offline bank instead of building
  std::string probes;     ///< comma-separated probe times
  int dump_every = 0;
  std::string dump_matrix;
  std::uint64_t seed = 12345;
  int threads = 0;  ///< 0: hardware concurrency

  static RunConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  std::string resolved_text() const;

  int resolved_threads() const;
  SourceSpec source_spec() const;
};

/// Mesh + media bundle shared by the pipelines.
struct Problem {
  FineMesh fine;
  CoarseMesh coarse;
  CoefficientField field;
};
Problem setup_problem(const RunConfig& cfg);

/// Fine reference solve.
struct FineRun {
  Vec full_final;  ///< full-grid nodal values (Dirichlet zeros included)
  Vec full_prev;
  TimeGrid grid;
  Real t_loop = 0;
  StabilityReport stability;
  std::vector<std::pair<std::int64_t, Vec>> probe_fields;  ///< full-grid snapshots
};
FineRun run_fine(const RunConfig& cfg, const Problem& prob);

/// Offline + online coarse solve; the bank is built or loaded per config.
struct CoarseRun {
  LocalBasisBank bank;
  DGSystem system;
  TraceConstantEstimate trace;
  StabilityReport stability;
  TimeGrid grid;
  CoarseState final_state;
  CoarseState prev_state;
  Real t_assembly = 0;  ///< DG assembly from the bank (offline-side)
  Real t_loop = 0;      ///< time loop only (online)
  std::vector<std::pair<std::int64_t, Vec>> probe_states;  ///< coefficient snapshots
};
CoarseRun run_gmsfem(const RunConfig& cfg, const Problem& prob);
/// Variant reusing an existing bank (sweeps, cached offline stages).
CoarseRun run_gmsfem_with_bank(const RunConfig& cfg, const Problem& prob, LocalBasisBank bank);

/// End-to-end pipeline: fine reference, offline, online, error metrics.
struct CompareResult {
  FineRun fine;
  CoarseRun coarse;
  ErrorReport report;
};
CompareResult run_compare(const RunConfig& cfg);

/// Property-suite outcome for one check.
struct VerifierResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<VerifierResult> verify_mesh(const Problem& prob);
std::vector<VerifierResult> verify_bank(const Problem& prob, const LocalBasisBank& bank);
std::vector<VerifierResult> verify_system(const Problem& prob, const LocalBasisBank& bank,
                                          const DGSystem& system, std::uint64_t seed);
std::vector<VerifierResult> verify_cfl(const Problem& prob, const DGSystem& system,
                                       std::uint64_t seed);

/// Runs every suite on the configured problem, prints one line per check,
/// returns the failure count.
int run_verifiers(const RunConfig& cfg);

/// Sweep driver: one offline stage at the strongest parameters, re-selected
/// per row. Writes `results.csv` under cfg.outdir.
enum class SweepParam { interior_m, energy };
std::vector<ErrorReport> run_sweep(const RunConfig& cfg, SweepParam param,
                                   const std::vector<Real>& values);

}  // namespace gmswave

#endif
