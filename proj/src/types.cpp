#include "ocpkit/types.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ocpkit {

Box::Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw DimensionMismatch(fmt::format("box bounds have sizes {} and {}", lower.size(), upper.size()));
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
      throw InvalidArgument(fmt::format("box axis {} is not a finite interval: [{}, {}]", i, lower[i], upper[i]));
    }
  }
}

bool Box::contains(const Vec& v, double tol) const {
  if (v.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= lower[i] - tol && v[i] <= upper[i] + tol)) return false;
  }
  return true;
}

Vec Box::project(const Vec& v) const { return v.cwiseMax(lower).cwiseMin(upper); }

Vec Box::to_unit(const Vec& v) const {
  Vec s(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double h = 0.5 * (upper[i] - lower[i]);
    s[i] = h > 0 ? (v[i] - 0.5 * (upper[i] + lower[i])) / h : 0.0;
  }
  return s;
}

Vec Box::scale() const {
  Vec h = half_width();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0)) h[i] = 1.0;
  }
  return h;
}

Vec Box::from_unit(const Vec& s) const { return mid() + half_width().cwiseProduct(s); }

std::vector<Vec> Box::vertices() const {
  const int n = dim();
  std::vector<Vec> out;
  out.reserve(std::size_t{1} << n);
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1u ? upper[i] : lower[i];
    out.push_back(std::move(v));
  }
  return out;
}

void require_size(Eigen::Index actual, Eigen::Index expected, const std::string& what) {
  if (actual != expected) {
    throw DimensionMismatch(fmt::format("{}: expected size {}, got {}", what, expected, actual));
  }
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace ocpkit
