// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file prolongation.hpp
 * @brief Standard Engel domains, contactification of slices, development
 *        maps and leaf transport between slices.
 *
 * Product charts put the base point first and the angle last:
 * q = (m_1, m_2, m_3, theta). The Engel frame of a domain is ordered
 * {transverse field, slice-tangent field}; for the unperturbed domain that is
 * {d/dtheta, V(theta, m)} with V = cos(theta) V0 + sin(theta) V1.
 */

#include "engel/core/field.hpp"
#include "engel/core/integrator.hpp"
#include "engel/core/linalg.hpp"
#include "engel/distributions.hpp"

#include <numbers>
#include <optional>
#include <span>

namespace engel {

/// A contact 3-manifold chart with a global Legendrian frame (V0, V1).
struct ParallelizedContact {
  VectorField v0;
  VectorField v1;
  std::optional<OneForm> alpha;

  const ChartId& chart() const { return v0.chart(); }
  DistributionFrame frame() const { return DistributionFrame({v0, v1}); }

  /// The supplied form, or V0 x V1 (which annihilates both frame fields).
  OneForm annihilator() const
  {
    if (alpha) return *alpha;
    const VectorField a = v0, b = v1;
    return OneForm(a.chart(), 3, 3, std::min(a.max_order(), b.max_order()),
                   [a, b](const Vec& p, int order) { return cross(a.jets(p, order), b.jets(p, order)); });
  }
};

inline ParallelizedContact make_parallelized_contact(VectorField v0, VectorField v1, std::optional<OneForm> alpha = std::nullopt)
{
  detail::require_same_chart(v0, v1);
  if (v0.dim() != 3) throw std::invalid_argument("ParallelizedContact: base chart must be 3-dimensional");
  if (alpha) detail::require_same_chart(v0, *alpha);
  return {std::move(v0), std::move(v1), std::move(alpha)};
}

/// Checks the frame is contact, and Legendrian for the supplied form, at each point.
inline void validate_contact(const ParallelizedContact& c, std::span<const Vec> points, double tol = kDefaultRankTol)
{
  const DistributionFrame f = c.frame();
  for (const Vec& p : points) {
    if (!is_contact(f, Point(c.chart(), p), tol)) throw GeometryError("frame is not contact", p);
    if (c.alpha) {
      const Vec a = c.alpha->value(p);
      const double scale = a.norm();
      if (std::abs(a.dot(c.v0.value(p))) > 1e-10 * scale || std::abs(a.dot(c.v1.value(p))) > 1e-10 * scale)
        throw GeometryError("frame is not Legendrian for the supplied contact form", p);
    }
  }
}

enum class ThetaRange { QuarterTurn, FullCircle };

/// Engel structure on a product chart M x (theta interval), with the data
/// needed to project along leaves back to the bottom slice.
struct EngelDomain {
  ParallelizedContact base;
  ThetaRange range = ThetaRange::FullCircle;
  ChartId chart;
  DistributionFrame frame;       ///< {transverse, slice-tangent}
  VectorField slice_tangent;     ///< spans D intersected with the theta-slices
  /// Field known to span the characteristic line, theta-component 1; when
  /// absent the line is computed from the frame brackets.
  std::optional<VectorField> leaf_hint;

  static constexpr int kThetaAxis = 3;

  double theta_max() const { return range == ThetaRange::FullCircle ? 2 * std::numbers::pi : std::numbers::pi / 2; }
  Point at(const Vec& m, double theta) const
  {
    Vec q(4);
    q << m, theta;
    return Point(chart, q);
  }
};

inline ChartId product_chart(const ChartId& base) { return ChartId{base.name + "xS1"}; }

/// V(theta, m) = cos(theta) V0(m) + sin(theta) V1(m) on the product chart.
inline VectorField rotating_field(const ParallelizedContact& c, const ChartId& chart, double phase = 0.0)
{
  const VectorField v0 = embed(c.v0, chart, 4, {0, 1, 2});
  const VectorField v1 = embed(c.v1, chart, 4, {0, 1, 2});
  return VectorField(chart, 4, 4, std::min(v0.max_order(), v1.max_order()), [v0, v1, phase](const Vec& q, int order) {
    const JetTuple a = v0.jets(q, order), b = v1.jets(q, order);
    const Jet th = Jet::variable(4, order, EngelDomain::kThetaAxis, q[EngelDomain::kThetaAxis] + phase);
    const Jet c = cos(th), s = sin(th);
    JetTuple r;
    for (int i = 0; i < 4; ++i) r.push_back(c * a[i] + s * b[i]);
    return r;
  });
}

/// Prolongation: M x S^1 (or the quarter domain) with frame {d/dtheta, V(theta, .)}.
inline EngelDomain prolong(const ParallelizedContact& contact, ThetaRange range = ThetaRange::FullCircle,
                           std::span<const Vec> check_points = {})
{
  validate_contact(contact, check_points);
  const ChartId chart = product_chart(contact.chart());
  const VectorField dtheta = coordinate_field(chart, 4, EngelDomain::kThetaAxis);
  const VectorField v = rotating_field(contact, chart);
  return EngelDomain{contact, range, chart, DistributionFrame({dtheta, v}), v, dtheta};
}

/// A coordinate slice {q_axis = value} (read modulo `period` when positive).
struct Slice {
  int axis = EngelDomain::kThetaAxis;
  double value = 0.0;
  double period = 0.0;

  ChartId chart(const ChartId& ambient) const
  {
    return ChartId{ambient.name + "|q" + std::to_string(axis) + "=" + std::to_string(value)};
  }
  Vec lift(const Vec& s) const
  {
    Vec q(s.size() + 1);
    for (Eigen::Index i = 0, j = 0; i < q.size(); ++i) q[i] = (i == axis) ? value : s[j++];
    return q;
  }
  Vec drop(const Vec& q) const
  {
    Vec s(q.size() - 1);
    for (Eigen::Index i = 0, j = 0; i < q.size(); ++i)
      if (i != axis) s[j++] = q[i];
    return s;
  }
  double constraint(const Vec& q) const { return q[axis] - value; }
};

/// Characteristic line field of the domain, scaled to theta-component 1.
inline VectorField leaf_field(const EngelDomain& dom)
{
  if (dom.leaf_hint) return *dom.leaf_hint;
  const VectorField raw = characteristic_field(dom.frame);
  return VectorField(dom.chart, 4, 4, raw.max_order(), [raw](const Vec& q, int order) {
    JetTuple l = raw.jets(q, order);
    double norm = 0.0;
    for (const auto& c : l) norm = std::hypot(norm, c.value());
    if (!(std::abs(l[EngelDomain::kThetaAxis].value()) > 1e-12 * norm))
      throw GeometryError("leaf_field: characteristic line tangent to the theta-slices", q);
    const Jet inv = reciprocal(l[EngelDomain::kThetaAxis]);
    for (auto& c : l) c = c * inv;
    return l;
  });
}

/**
 * Contact structure induced on a slice transverse to the characteristic line:
 * the rank-2 intersection of the slice tangent space with D^2, framed by the
 * projections along L of the slice-tangent frame vector u and of B = [X, Y].
 */
inline ParallelizedContact contactify(const DistributionFrame& d, const Slice& slice, std::span<const Vec> check_points = {},
                                      double tol = kDefaultRankTol)
{
  if (d.rank() != 2 || d.ambient_dim() != 4) throw std::invalid_argument("contactify: needs an Engel frame in dimension 4");
  const VectorField x = d[0], y = d[1];
  const VectorField b = lie_bracket(x, y);
  const VectorField bx = lie_bracket(b, x), by = lie_bracket(b, y);
  const ChartId sc = slice.chart(d.chart());
  const int axis = slice.axis;

  for (const Vec& s : check_points) {
    const Point q(d.chart(), slice.lift(s));
    const LineDirection l = characteristic_line(d, q, tol);
    if (std::abs(l.direction[axis]) < std::sin(1e-3)) throw GeometryError("contactify: slice is not transverse to the characteristic line", q.coords);
  }

  // which[0]: projected u, which[1]: projected B
  auto make = [=](int which) {
    return VectorField(sc, 3, 3, bx.max_order(), [=](const Vec& s, int order) {
      const Vec q = slice.lift(s);
      const JetTuple jx = x.jets(q, order), jy = y.jets(q, order), jb = b.jets(q, order);
      const Jet c1 = det_jets({jx, jy, jb, bx.jets(q, order)});
      const Jet c2 = det_jets({jx, jy, jb, by.jets(q, order)});
      JetTuple ell;
      for (int i = 0; i < 4; ++i) ell.push_back(c2 * jx[i] - c1 * jy[i]);
      if (std::abs(ell[axis].value()) == 0.0) throw GeometryError("contactify: characteristic line tangent to slice", q);
      const JetTuple& src = which == 0 ? (std::abs(c2.value()) >= std::abs(c1.value()) ? jy : jx) : jb;
      const Jet ratio = src[axis] / ell[axis];
      JetTuple out;
      for (int i = 0; i < 4; ++i) {
        if (i == axis) continue;
        out.push_back((src[i] - ratio * ell[i]).restricted(axis));
      }
      return out;
    });
  };
  ParallelizedContact result{make(0), make(1), std::nullopt};
  for (const Vec& s : check_points)
    if (!is_contact(result.frame(), Point(sc, s), tol)) throw GeometryError("contactify: induced plane field is not contact", slice.lift(s));
  return result;
}

struct Development {
  LineDirection line;   ///< developed direction at the foot point, in base coordinates
  Vec frame_coords;     ///< (a, b) with direction proportional to a V0 + b V1
  double angle = 0.0;   ///< atan2(b, a)
  double contact_residual = 0.0;
};

namespace detail {

/// Flow q back to theta = 0 along the leaf, transporting tangent vectors; returns
/// the foot point and the projections dpi(v) of the vectors into T_m M.
inline std::pair<Vec, std::vector<Vec>> project_to_bottom(const EngelDomain& dom, const Vec& q, const std::vector<Vec>& vectors,
                                                          double tol)
{
  const VectorField leaf = leaf_field(dom);
  const int m = static_cast<int>(vectors.size());
  Vec y(4 * (m + 1));
  y.head(4) = q;
  for (int k = 0; k < m; ++k) y.segment(4 * (k + 1), 4) = vectors[k];
  IntegratorOptions opts;
  opts.tol = tol;
  const IntegrationResult r = integrate(variational_rhs(leaf, m), 0.0, y, -q[EngelDomain::kThetaAxis], opts);
  const Vec end = r.y.head(4);
  const Vec l_end = leaf.value(end);
  std::vector<Vec> out;
  for (int k = 0; k < m; ++k) {
    const Vec d = r.y.segment(4 * (k + 1), 4);
    out.push_back((d - d[EngelDomain::kThetaAxis] * l_end).head(3));
  }
  return {end.head(3), out};
}

}  // namespace detail

/**
 * Development at q: push the slice-tangent line of D(q) down the leaf to the
 * bottom slice and express it in the contact plane there.
 */
inline Development development(const EngelDomain& dom, const Point& q, double tol = 1e-11)
{
  if (!(q.chart == dom.chart)) throw std::invalid_argument("development: chart mismatch");
  const Vec v = dom.slice_tangent.value(q.coords);
  auto [foot, pushed] = detail::project_to_bottom(dom, q.coords, {v}, tol);
  const Vec& w = pushed[0];
  Mat basis(3, 2);
  basis << dom.base.v0.value(foot), dom.base.v1.value(foot);
  if (w.norm() < 1e-10 * v.norm()) throw GeometryError("development: transport Jacobian is ill-conditioned", q.coords);
  const Vec ab = basis.colPivHouseholderQr().solve(w);
  Vec normal = dom.base.annihilator().value(foot);
  normal.normalize();
  Development dev;
  dev.line = {Point(dom.base.chart(), foot), w.normalized(), LineOrientation::Reference};
  dev.frame_coords = ab;
  dev.angle = std::atan2(ab[1], ab[0]);
  dev.contact_residual = std::abs(normal.dot(w.normalized()));
  return dev;
}

/// Affine coordinate of the developed line: slope b'/a' after applying the
/// chart matrix to its (V0, V1) coordinates.
inline double leaf_projective_coordinate(const EngelDomain& dom, const Point& q, const Eigen::Matrix2d& chart = Eigen::Matrix2d::Identity(),
                                         double tol = 1e-11)
{
  const Development dev = development(dom, q, tol);
  const Eigen::Vector2d ab = chart * Eigen::Vector2d(dev.frame_coords[0], dev.frame_coords[1]);
  if (std::abs(ab[0]) < 1e-9 * ab.norm()) throw GeometryError("leaf_projective_coordinate: developed line is the excluded direction", q.coords);
  return ab[1] / ab[0];
}

/// w -> (a w + b) / (c w + d)
struct LinearFractional {
  double a = 1, b = 0, c = 0, d = 1;

  double operator()(double w) const { return (a * w + b) / (c * w + d); }

  /// The unique map sending w_i to v_i for three distinct w_i.
  static LinearFractional through_three_points(std::span<const double, 3> w, std::span<const double, 3> v)
  {
    // solve a w - b... homogeneous: a w + b - c w v - d v = 0 with d fixed by the null vector
    Mat m(3, 4);
    for (int i = 0; i < 3; ++i) m.row(i) << w[i], 1.0, -w[i] * v[i], -v[i];
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
    const Vec n = svd.matrixV().col(3);
    return {n[0], n[1], n[2], n[3]};
  }

  struct Fit;
  static Fit fit(std::span<const double> w, std::span<const double> v);
};

struct LinearFractional::Fit {
  LinearFractional map;
  double max_residual = 0.0;
};

/// Least-squares fit of v ~ (a w + b)/(c w + d) via the homogeneous linear
/// system; the residual reported is max |v_i - map(w_i)|.
inline LinearFractional::Fit LinearFractional::fit(std::span<const double> w, std::span<const double> v)
{
  const int n = static_cast<int>(w.size());
  Mat m(n, 4);
  for (int i = 0; i < n; ++i) m.row(i) << w[i], 1.0, -w[i] * v[i], -v[i];
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec k = svd.matrixV().col(3);
  Fit f{{k[0], k[1], k[2], k[3]}, 0.0};
  for (int i = 0; i < n; ++i) f.max_residual = std::max(f.max_residual, std::abs(v[i] - f.map(w[i])));
  return f;
}

struct SliceTransport {
  Point image;          ///< in slice_b coordinates
  Mat plane_map;        ///< 2x2: contact frame of slice_a at m -> contact frame of slice_b at image
  double contact_residual = 0.0;
  double arclength = 0.0;
};

struct TransportOptions {
  double tol = 1e-11;
  double max_arclength = 50.0;
  double event_tol = 1e-10;
};

/// Unit-speed version of an oriented leaf field.
inline VectorField unit_speed(const VectorField& leaf)
{
  return VectorField(leaf.chart(), leaf.dim(), leaf.dim(), leaf.max_order(), [leaf](const Vec& q, int order) {
    JetTuple l = leaf.jets(q, order);
    const Jet inv = reciprocal(sqrt(dot(l, l)));
    for (auto& c : l) c = c * inv;
    return l;
  });
}

/**
 * Follow the +L leaf from m on slice_a to its first crossing with slice_b,
 * transporting the contact plane of slice_a along the way.
 */
inline SliceTransport slice_transport(const DistributionFrame& d, const VectorField& oriented_leaf, const Slice& slice_a,
                                      const Slice& slice_b, const Point& m, const TransportOptions& opts = {})
{
  const ChartId chart_a = slice_a.chart(d.chart());
  if (!(m.chart == chart_a)) throw std::invalid_argument("slice_transport: point is not on slice_a");
  const ParallelizedContact xi_a = contactify(d, slice_a);
  const ParallelizedContact xi_b = contactify(d, slice_b);
  const Vec q0 = slice_a.lift(m.coords);
  const Vec e1 = slice_a.lift(xi_a.v0.value(m.coords)), e2 = slice_a.lift(xi_a.v1.value(m.coords));
  // the lift helper inserts the slice value; tangent vectors need 0 there
  Vec t1 = e1, t2 = e2;
  t1[slice_a.axis] = 0.0;
  t2[slice_a.axis] = 0.0;

  const VectorField unit = unit_speed(oriented_leaf);
  Vec y(12);
  y << q0, t1, t2;
  EventSpec ev{[&](double, const Vec& s) { return slice_b.constraint(s); }, slice_b.period, opts.event_tol};
  IntegratorOptions io;
  io.tol = opts.tol;
  const IntegrationResult r = integrate(variational_rhs(unit, 2), 0.0, y, opts.max_arclength, io, &ev);
  if (!r.event_hit) throw GeometryError("slice_transport: leaf did not reach the target slice", q0);
  const Vec q1 = r.y.head(4);
  const Vec l1 = unit.value(q1);
  if (std::abs(l1[slice_b.axis]) < std::sin(1e-3)) throw GeometryError("slice_transport: grazing intersection", q1);

  Vec s1 = slice_b.drop(q1);
  Mat pushed(3, 2);
  for (int k = 0; k < 2; ++k) {
    const Vec dlt = r.y.segment(4 * (k + 1), 4);
    pushed.col(k) = slice_b.drop(dlt - (dlt[slice_b.axis] / l1[slice_b.axis]) * l1);
  }
  Mat basis(3, 2);
  basis << xi_b.v0.value(s1), xi_b.v1.value(s1);
  SliceTransport out;
  out.image = Point(slice_b.chart(d.chart()), s1);
  out.plane_map = basis.colPivHouseholderQr().solve(pushed);
  const Eigen::Vector3d normal = Eigen::Vector3d(basis.col(0)).cross(Eigen::Vector3d(basis.col(1))).normalized();
  for (int k = 0; k < 2; ++k) out.contact_residual = std::max(out.contact_residual, std::abs(normal.dot(pushed.col(k).normalized())));
  out.arclength = r.t;
  return out;
}

inline SliceTransport slice_transport(const EngelDomain& dom, const Slice& slice_a, const Slice& slice_b, const Point& m,
                                      const TransportOptions& opts = {})
{
  return slice_transport(dom.frame, leaf_field(dom), slice_a, slice_b, m, opts);
}

}  // namespace engel
