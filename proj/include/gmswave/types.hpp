#ifndef GMSWAVE_TYPES_HPP
#define GMSWAVE_TYPES_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace gmswave {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;

/// Bad user input: mesh/block counts, parameter ranges, missing files.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

/// Bad data content: non-positive coefficients, malformed rasters.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

/// Broken internal invariant; indicates a bug, not bad input.
class InternalError : public std::runtime_error {
public:
  explicit InternalError(const std::string& msg) : std::runtime_error("internal error: " + msg) {}
};

/// Divergent time integration (NaN/Inf state detected mid-run).
class InstabilityError : public std::runtime_error {
public:
  explicit InstabilityError(const std::string& msg) : std::runtime_error("instability: " + msg) {}
};

}  // namespace gmswave

#endif
