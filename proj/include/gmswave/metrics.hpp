#ifndef GMSWAVE_METRICS_HPP
#define GMSWAVE_METRICS_HPP

#include "gmswave/ipdg.hpp"
#include "gmswave/msbasis.hpp"
#include "gmswave/types.hpp"

#include <string>
#include <vector>

namespace gmswave {

/// Blockwise nodal values; double-valued on coarse edges by construction.
struct BrokenField {
  std::vector<Vec> block_values;
};

/// Evaluates a coarse state on the fine nodes of every block.
BrokenField expand(const CoarseState& state, const LocalBasisBank& bank, const CoarseMesh& coarse);

/// Restricts a full-grid nodal field blockwise (single-valued data).
BrokenField broken_from_fine(const Vec& nodal_full, const CoarseMesh& coarse);

/// Conforming nodal field from a broken one by averaging shared nodes.
Vec conforming_average(const BrokenField& field, const FineMesh& fine, const CoarseMesh& coarse);

/// Sum over coarse edges of the squared trace jump (unit weights).
Real jump_energy(const BrokenField& field, const FineMesh& fine, const CoarseMesh& coarse);

struct ErrorReport {
  Real e2 = 0;
  Real e2_bar = 0;
  Real eH1 = 0;
  Real eJump = 0;
  bool relative_valid = true;  ///< false when the reference norm vanishes
  Real norm_u = 0;             ///< reference L2 norm

  Real t_off = 0, t_on = 0, t_fine = 0;

  Real theta = 0;
  int m = 0;
  Real gamma = 0;
  int nx = 0, ny = 0, blocks_x = 0, blocks_y = 0;
  int oversample = -1;
  int p_min = 0, p_max = 0;
  Real mu_min = 0;      ///< smallest first-excluded boundary eigenvalue; NaN if none
  Real lambda_min = 0;  ///< smallest first-excluded interior eigenvalue; NaN if none
};

/// The four error quantities of a coarse solution against the fine reference
/// (full-grid nodal vector). Norms are blockwise quadratures with the exact
/// local mass/stiffness forms.
ErrorReport compute_errors(const BrokenField& u_coarse, const Vec& fine_full, const FineMesh& fine,
                           const CoarseMesh& coarse, const CoefficientField& field);

/// Selection metadata (p range, first-excluded eigenvalues) from a bank.
void fill_bank_metadata(ErrorReport& report, const LocalBasisBank& bank);

/// Flat key-value report; config_text is embedded verbatim with `config.` keys.
void write_report_kv(const ErrorReport& report, const std::string& path,
                     const std::string& config_text);

/// One CSV row per run, mirroring the result-table layout; writes a header on
/// first use.
void append_report_csv(const ErrorReport& report, const std::string& path);

}  // namespace gmswave

#endif
