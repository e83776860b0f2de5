// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file distributions.hpp
 * @brief Derived flags, Engel and contact tests, characteristic line, Reeb field.
 *
 * Ranks are decided from singular values with a cutoff relative to the
 * largest singular value of each stage; every FlagReport carries the full
 * singular values so near-degenerate samples can be audited.
 */

#include "engel/core/field.hpp"
#include "engel/core/linalg.hpp"

#include <array>
#include <optional>
#include <vector>

namespace engel {

inline constexpr double kDefaultRankTol = 1e-7;

class DistributionFrame {
 public:
  explicit DistributionFrame(std::vector<VectorField> fields) : fields_(std::move(fields))
  {
    if (fields_.empty()) throw std::invalid_argument("DistributionFrame: empty frame");
    for (const auto& f : fields_) detail::require_same_chart(fields_.front(), f);
  }

  const std::vector<VectorField>& fields() const { return fields_; }
  const VectorField& operator[](std::size_t i) const { return fields_[i]; }
  int rank() const { return static_cast<int>(fields_.size()); }
  int ambient_dim() const { return fields_.front().dim(); }
  const ChartId& chart() const { return fields_.front().chart(); }

  /// Frame vectors as matrix columns at p.
  Mat matrix(const Vec& p) const
  {
    Mat m(ambient_dim(), rank());
    for (int i = 0; i < rank(); ++i) m.col(i) = fields_[i].value(p);
    return m;
  }

  /// Second-stage brackets [X_i, X_j], i < j.
  std::vector<VectorField> first_brackets() const
  {
    std::vector<VectorField> out;
    for (int i = 0; i < rank(); ++i)
      for (int j = i + 1; j < rank(); ++j) out.push_back(lie_bracket(fields_[i], fields_[j]));
    return out;
  }

 private:
  std::vector<VectorField> fields_;
};

struct FlagReport {
  Point point;
  std::array<int, 3> ranks{};
  std::array<Vec, 3> singular_values;
  double tol = kDefaultRankTol;

  bool is_engel_ranks() const { return ranks == std::array<int, 3>{2, 3, 4}; }
};

/// Ranks of D, D^2 = D + [D, D] and D^3 = D^2 + [D, D^2] at p.
inline FlagReport flag_ranks(const DistributionFrame& d, const Point& p, double tol = kDefaultRankTol)
{
  if (!(p.chart == d.chart())) throw std::invalid_argument("flag_ranks: chart mismatch");
  FlagReport rep;
  rep.point = p;
  rep.tol = tol;
  const Vec& x = p.coords;
  const int n = d.ambient_dim();

  Mat stage1 = d.matrix(x);
  rep.singular_values[0] = singular_values(stage1);
  const Vec& sv1 = rep.singular_values[0];
  if (sv1.size() == 0 || sv1[sv1.size() - 1] <= tol * sv1[0])
    throw GeometryError("flag_ranks: frame is degenerate", x);
  rep.ranks[0] = relative_rank(sv1, tol);

  const std::vector<VectorField> second = d.first_brackets();
  Mat stage2(n, stage1.cols() + static_cast<Eigen::Index>(second.size()));
  stage2 << stage1, Mat(n, second.size());
  for (std::size_t i = 0; i < second.size(); ++i) stage2.col(stage1.cols() + i) = second[i].value(x);
  rep.singular_values[1] = singular_values(stage2);
  rep.ranks[1] = relative_rank(rep.singular_values[1], tol);

  std::vector<Vec> third_cols;
  for (const auto& f : d.fields())
    for (const auto& b : second) third_cols.push_back(lie_bracket(f, b).value(x));
  Mat stage3(n, stage2.cols() + static_cast<Eigen::Index>(third_cols.size()));
  stage3.leftCols(stage2.cols()) = stage2;
  for (std::size_t i = 0; i < third_cols.size(); ++i) stage3.col(stage2.cols() + i) = third_cols[i];
  rep.singular_values[2] = singular_values(stage3);
  rep.ranks[2] = relative_rank(rep.singular_values[2], tol);

  // a stage can only lose rank numerically; keep the report monotone
  rep.ranks[1] = std::max(rep.ranks[1], rep.ranks[0]);
  rep.ranks[2] = std::max(rep.ranks[2], rep.ranks[1]);
  return rep;
}

inline bool is_engel(const DistributionFrame& d, const Point& p, double tol = kDefaultRankTol)
{
  return d.ambient_dim() == 4 && d.rank() == 2 && flag_ranks(d, p, tol).is_engel_ranks();
}

/// Frame variant: rank {V0, V1, [V0, V1]} = 3 on a 3-dimensional chart.
inline bool is_contact(const DistributionFrame& d, const Point& p, double tol = kDefaultRankTol)
{
  if (d.ambient_dim() != 3) throw std::invalid_argument("is_contact: chart dimension must be 3");
  if (d.rank() != 2) throw std::invalid_argument("is_contact: frame must have rank 2");
  return flag_ranks(d, p, tol).ranks[1] == 3;
}

/// alpha ^ d alpha as the coefficient of dx ^ dy ^ dz.
inline double contact_volume(const OneForm& alpha, const Vec& p)
{
  const JetTuple a = alpha.jets(p, 1);
  const Mat da = exterior_derivative(alpha, p);
  return a[0].value() * da(1, 2) + a[1].value() * da(2, 0) + a[2].value() * da(0, 1);
}

/// Form variant: |alpha ^ d alpha| > tol at p.
inline bool is_contact(const OneForm& alpha, const Point& p, double tol = kDefaultRankTol)
{
  if (alpha.dim() != 3) throw std::invalid_argument("is_contact: chart dimension must be 3");
  if (!(p.chart == alpha.chart())) throw std::invalid_argument("is_contact: chart mismatch");
  return std::abs(contact_volume(alpha, p.coords)) > tol;
}

enum class LineOrientation {
  FirstFrameVector,  ///< positive coefficient on the first frame vector (second if the first vanishes)
  Reference,         ///< positive inner product with a caller-supplied reference vector
};

struct LineDirection {
  Point base;
  Vec direction;
  LineOrientation sign_convention = LineOrientation::FirstFrameVector;
};

/**
 * The characteristic line of an Engel frame {X, Y} at p: the kernel of
 * v -> [[X, Y], v] mod D^2 on D_p. The mod-D^2 component is measured along
 * the left singular vector of [X Y [X,Y]] complementary to D^2.
 */
inline LineDirection characteristic_line(const DistributionFrame& d, const Point& p, double tol = kDefaultRankTol,
                                         const std::optional<Vec>& reference = std::nullopt)
{
  if (d.rank() != 2 || d.ambient_dim() != 4) throw std::invalid_argument("characteristic_line: needs a rank-2 frame in dimension 4");
  if (!flag_ranks(d, p, tol).is_engel_ranks()) throw GeometryError("characteristic_line: frame is not Engel", p.coords);
  const Vec& x = p.coords;
  const VectorField b = lie_bracket(d[0], d[1]);
  Mat s(4, 3);
  s << d[0].value(x), d[1].value(x), b.value(x);
  Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeFullU);
  const Vec normal = svd.matrixU().col(3);
  const Vec bx = lie_bracket(b, d[0]).value(x);
  const Vec by = lie_bracket(b, d[1]).value(x);
  const double c1 = normal.dot(bx), c2 = normal.dot(by);
  const double scale = std::max({bx.norm(), by.norm(), 1e-300});
  if (std::hypot(c1, c2) <= tol * scale) throw GeometryError("characteristic_line: kernel is not one-dimensional", x);

  double a = c2, bcoef = -c1;
  Vec dir = a * s.col(0) + bcoef * s.col(1);
  LineOrientation conv = LineOrientation::FirstFrameVector;
  if (reference) {
    conv = LineOrientation::Reference;
    if (dir.dot(*reference) < 0.0) dir = -dir;
  } else {
    const double lead = std::abs(a) > 1e-12 * std::hypot(a, bcoef) ? a : bcoef;
    if (lead < 0.0) dir = -dir;
  }
  return {p, dir.normalized(), conv};
}

/// Smooth spanning field det(X,Y,B,[B,Y]) X - det(X,Y,B,[B,X]) Y of the
/// characteristic line, B = [X, Y]. Unnormalized; evaluable to two orders
/// less than the frame.
inline VectorField characteristic_field(const DistributionFrame& d)
{
  if (d.rank() != 2 || d.ambient_dim() != 4) throw std::invalid_argument("characteristic_field: needs a rank-2 frame in dimension 4");
  const VectorField x = d[0], y = d[1];
  const VectorField b = lie_bracket(x, y);
  const VectorField bx = lie_bracket(b, x), by = lie_bracket(b, y);
  return VectorField(d.chart(), 4, 4, bx.max_order(), [x, y, b, bx, by](const Vec& p, int order) {
    const JetTuple jx = x.jets(p, order), jy = y.jets(p, order), jb = b.jets(p, order);
    const Jet c1 = det_jets({jx, jy, jb, bx.jets(p, order)});
    const Jet c2 = det_jets({jx, jy, jb, by.jets(p, order)});
    JetTuple r;
    for (int i = 0; i < 4; ++i) r.push_back(c2 * jx[i] - c1 * jy[i]);
    return r;
  });
}

/// Reeb vector at p: alpha(Z) = 1 and i_Z d alpha = 0, solved in least squares.
inline Vec reeb_field(const OneForm& alpha, const Point& p, double tol = 1e-10)
{
  if (!(p.chart == alpha.chart())) throw std::invalid_argument("reeb_field: chart mismatch");
  const int n = alpha.dim();
  const Vec a = alpha.value(p.coords);
  const Mat da = exterior_derivative(alpha, p.coords);
  Mat sys(n + 1, n);
  sys.row(0) = a.transpose();
  sys.bottomRows(n) = da.transpose();  // row j: d alpha(Z, e_j) = sum_i Z_i da(i, j)
  Vec rhs = Vec::Zero(n + 1);
  rhs[0] = 1.0;
  Eigen::JacobiSVD<Mat> svd(sys, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  if (sv[n - 1] <= tol * std::max(1.0, sv[0])) throw GeometryError("reeb_field: singular system (form is not contact)", p.coords);
  const Vec z = svd.solve(rhs);
  if ((sys * z - rhs).norm() > 1e-8 * std::max(1.0, z.norm()))
    throw GeometryError("reeb_field: inconsistent system (form is not contact)", p.coords);
  return z;
}

/// Reeb field of a contact form on a 3-chart: curl(alpha) / (alpha . curl(alpha)).
inline VectorField reeb_vector_field(const OneForm& alpha)
{
  if (alpha.dim() != 3) throw std::invalid_argument("reeb_vector_field: chart dimension must be 3");
  return VectorField(alpha.chart(), 3, 3, alpha.max_order() - 1, [alpha](const Vec& p, int order) {
    const JetTuple a = alpha.jets(p, order + 1);
    const JetTuple curl{a[2].derivative(1) - a[1].derivative(2), a[0].derivative(2) - a[2].derivative(0),
                        a[1].derivative(0) - a[0].derivative(1)};
    JetTuple at;
    for (const auto& c : a) at.push_back(c.truncated(order));
    const Jet vol = dot(at, curl);
    if (vol.value() == 0.0) throw GeometryError("reeb_vector_field: form is not contact", p);
    const Jet inv = reciprocal(vol);
    JetTuple z;
    for (const auto& c : curl) z.push_back(c * inv);
    return z;
  });
}

}  // namespace engel
