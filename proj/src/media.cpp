#include "gmswave/media.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gmswave {

namespace {
constexpr const char* kRasterMagic = "gmswave-raster v1";

static_assert(sizeof(double) == 8);

}  // namespace

CoefficientField field_from_cells(const FineMesh& fine, Vec values) {
  if (values.size() != fine.cell_count())
    throw ConfigError("field size " + std::to_string(values.size()) + " does not match cell count " +
                      std::to_string(fine.cell_count()));
  CoefficientField f;
  for (int c = 0; c < values.size(); ++c) {
    if (!(values[c] > 0))
      throw DataError("non-positive coefficient at cell " + std::to_string(c));
  }
  f.a0 = values.minCoeff();
  f.a1 = values.maxCoeff();
  f.cell_values = std::move(values);
  return f;
}

void save_raster(const std::string& path, int nx, int ny, Real extent_x, Real extent_y,
                 const Vec& values) {
  if (values.size() != static_cast<Eigen::Index>(nx) * ny)
    throw InternalError("raster value count does not match dimensions");

  std::ofstream hdr(path + ".hdr");
  if (!hdr) throw DataError("cannot write raster header " + path + ".hdr");
  hdr.precision(17);
  hdr << kRasterMagic << "\n"
      << "nx " << nx << "\n"
      << "ny " << ny << "\n"
      << "extent_x " << extent_x << "\n"
      << "extent_y " << extent_y << "\n";

  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw DataError("cannot write raster " + path);
  bin.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

Raster load_raster_file(const std::string& path) {
  std::ifstream hdr(path + ".hdr");
  if (!hdr) throw DataError("missing raster header " + path + ".hdr");
  std::string magic;
  std::getline(hdr, magic);
  if (magic != kRasterMagic) throw DataError("bad raster magic in " + path + ".hdr");

  Raster r;
  std::string key;
  while (hdr >> key) {
    if (key == "nx")
      hdr >> r.nx;
    else if (key == "ny")
      hdr >> r.ny;
    else if (key == "extent_x")
      hdr >> r.extent_x;
    else if (key == "extent_y")
      hdr >> r.extent_y;
    else {
      std::string skip;
      hdr >> skip;
    }
  }
  if (r.nx <= 0 || r.ny <= 0) throw DataError("bad raster dimensions in " + path + ".hdr");

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw DataError("missing raster " + path);
  r.values.resize(static_cast<Eigen::Index>(r.nx) * r.ny);
  bin.read(reinterpret_cast<char*>(r.values.data()),
           static_cast<std::streamsize>(r.values.size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(r.values.size() * sizeof(double)))
    throw DataError("raster " + path + " truncated");
  return r;
}

CoefficientField load_raster(const std::string& path, const FineMesh& fine) {
  const Raster r = load_raster_file(path);
  if (r.nx % fine.nx != 0 || r.ny % fine.ny != 0)
    throw ConfigError("raster " + std::to_string(r.nx) + "x" + std::to_string(r.ny) +
                      " does not evenly map onto grid " + std::to_string(fine.nx) + "x" +
                      std::to_string(fine.ny));

  const int fx = r.nx / fine.nx;
  const int fy = r.ny / fine.ny;
  Vec vals(fine.cell_count());
  for (int cj = 0; cj < fine.ny; ++cj) {
    for (int ci = 0; ci < fine.nx; ++ci) {
      // raster cell containing the fine-cell midpoint
      const int ri = ci * fx + fx / 2;
      const int rj = cj * fy + fy / 2;
      vals[fine.cell_id(ci, cj)] = r.values[static_cast<Eigen::Index>(rj) * r.nx + ri];
    }
  }
  return field_from_cells(fine, std::move(vals));
}

CoefficientField synth_periodic_inclusions(const FineMesh& fine, Real background, Real contrast,
                                           int period) {
  if (!(background > 0)) throw ConfigError("background must be positive");
  if (!(contrast >= 1)) throw ConfigError("contrast must be >= 1");
  if (period < 2) throw ConfigError("period must be >= 2 cells");

  const int lo = period / 4;
  const int hi = lo + std::max(1, period / 2);
  Vec vals(fine.cell_count());
  for (int cj = 0; cj < fine.ny; ++cj) {
    for (int ci = 0; ci < fine.nx; ++ci) {
      const int ri = ci % period;
      const int rj = cj % period;
      const bool inside = ri >= lo && ri < hi && rj >= lo && rj < hi;
      vals[fine.cell_id(ci, cj)] = inside ? contrast * background : background;
    }
  }
  return field_from_cells(fine, std::move(vals));
}

CoefficientField media_from_spec(const std::string& spec, const FineMesh& fine) {
  if (spec.rfind("synth:", 0) == 0) {
    std::stringstream ss(spec);
    std::string tag, kind, bg, contrast, period;
    std::getline(ss, tag, ':');
    std::getline(ss, kind, ':');
    if (kind != "periodic") throw ConfigError("unknown synthetic media kind '" + kind + "'");
    if (!std::getline(ss, bg, ':') || !std::getline(ss, contrast, ':') ||
        !std::getline(ss, period, ':'))
      throw ConfigError("synthetic media spec needs synth:periodic:<bg>:<contrast>:<period>");
    return synth_periodic_inclusions(fine, std::stod(bg), std::stod(contrast), std::stoi(period));
  }
  return load_raster(spec, fine);
}

}  // namespace gmswave
