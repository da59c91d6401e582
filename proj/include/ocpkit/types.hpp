#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ocpkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Axis-aligned box {v : lower <= v <= upper}.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi);

  [[nodiscard]] int dim() const { return static_cast<int>(lower.size()); }
  [[nodiscard]] bool contains(const Vec& v, double tol = 0.0) const;
  [[nodiscard]] Vec project(const Vec& v) const;
  [[nodiscard]] Vec mid() const { return 0.5 * (lower + upper); }
  [[nodiscard]] Vec half_width() const { return 0.5 * (upper - lower); }
  /// Half widths with degenerate axes mapped to 1.
  [[nodiscard]] Vec scale() const;

  /// Maps v into [-1, 1]^n coordinates. Degenerate (zero-width) axes map to 0.
  [[nodiscard]] Vec to_unit(const Vec& v) const;
  [[nodiscard]] Vec from_unit(const Vec& s) const;

  /// All 2^n corners, ordered by the binary expansion of the corner index
  /// (bit i set selects the upper bound of axis i).
  [[nodiscard]] std::vector<Vec> vertices() const;
};

/// Throws DimensionMismatch with `what` if the sizes differ.
/// "%.17g" formatting shared by every text artifact.
std::string format_double(double v);

void require_size(Eigen::Index actual, Eigen::Index expected, const std::string& what);

}  // namespace ocpkit
