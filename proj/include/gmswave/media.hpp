#ifndef GMSWAVE_MEDIA_HPP
#define GMSWAVE_MEDIA_HPP

#include "gmswave/mesh.hpp"
#include "gmswave/types.hpp"

#include <string>

namespace gmswave {

/// Piecewise-constant coefficient a(x), one positive value per fine cell.
struct CoefficientField {
  Vec cell_values;  ///< length nx*ny, row-major
  Real a0 = 0;      ///< min over cells
  Real a1 = 0;      ///< max over cells

  Real at(int cell) const { return cell_values[cell]; }
};

/// Validates positivity and caches the bounds.
CoefficientField field_from_cells(const FineMesh& fine, Vec values);

/// Raster container: `<path>` holds row-major little-endian float64 values,
/// `<path>.hdr` is a small text header (magic, nx, ny, extent_x, extent_y).
void save_raster(const std::string& path, int nx, int ny, Real extent_x, Real extent_y,
                 const Vec& values);
struct Raster {
  int nx = 0, ny = 0;
  Real extent_x = 0, extent_y = 0;
  Vec values;
};
Raster load_raster_file(const std::string& path);

/// Loads a coefficient raster onto the fine grid. The raster may be finer by
/// an integer factor per axis; each fine cell takes the raster cell containing
/// its midpoint.
CoefficientField load_raster(const std::string& path, const FineMesh& fine);

/// Background field with contrast*background inside one centered square
/// inclusion (side period/2 cells) per period-by-period tile.
CoefficientField synth_periodic_inclusions(const FineMesh& fine, Real background, Real contrast,
                                           int period);

/// Parses "synth:periodic:<bg>:<contrast>:<period>" or treats the spec as a
/// raster path.
CoefficientField media_from_spec(const std::string& spec, const FineMesh& fine);

}  // namespace gmswave

#endif
