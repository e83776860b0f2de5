// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace engel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Identifies the coordinate chart a point or field lives on.
struct ChartId {
  std::string name;

  friend bool operator==(const ChartId&, const ChartId&) = default;
};

struct Point {
  ChartId chart;
  Vec coords;

  Point() = default;
  Point(ChartId c, Vec x) : chart(std::move(c)), coords(std::move(x))
  {
    if (!coords.allFinite()) throw std::invalid_argument("Point: non-finite coordinate");
  }

  int dim() const { return static_cast<int>(coords.size()); }
};

inline std::string format_coords(const Vec& x)
{
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

/// Raised when a geometric precondition fails; carries the offending point when known.
class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
  GeometryError(const std::string& what, Vec where)
      : std::runtime_error(what + " at " + format_coords(where)), point_(std::move(where))
  {
  }

  const std::optional<Vec>& point() const { return point_; }

 private:
  std::optional<Vec> point_;
};

/// Axis-aligned bounds of a chart's working region.
struct Box {
  Vec lower;
  Vec upper;

  bool contains(const Vec& x) const
  {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    return true;
  }

  static Box cube(int dim, double half_width)
  {
    return {Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width)};
  }
};

}  // namespace engel
