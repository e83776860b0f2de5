// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file zoll.hpp
 * @brief Geodesic direction fields on unit tangent bundles of surfaces,
 *        closedness reports, central projection, the Legendre ray map and
 *        the SO(3) x S^1 Engel frame.
 *
 * A unit tangent chart has coordinates (x1, x2, psi) with psi the angle of the
 * unit vector against the g-orthonormal frame e1 = d1 / |d1|, e2 obtained by
 * Gram-Schmidt from d2. The sphere atlas uses stereographic projections from
 * the north (chart 0) and south (chart 1) poles; both are related by
 * u -> u / |u|^2 and a point switches chart when |u| > 2.
 */

#include "engel/core/field.hpp"
#include "engel/core/integrator.hpp"
#include "engel/core/linalg.hpp"
#include "engel/distributions.hpp"
#include "engel/prolongation.hpp"

#include <Eigen/Dense>

#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace engel {

using MetricField = Field<ScalarKind>;  ///< components (g11, g12, g22) on a 2-chart

enum class Atlas { Plane, Sphere };

struct SurfaceMetric {
  std::string name;
  Atlas atlas = Atlas::Plane;
  std::vector<MetricField> charts;  ///< one metric field per chart

  int chart_count() const { return static_cast<int>(charts.size()); }
  ChartId surface_chart(int c) const { return charts.at(c).chart(); }
  ChartId tangent_chart(int c) const { return ChartId{surface_chart(c).name + "/ST"}; }
  Eigen::Matrix2d matrix(int c, const Eigen::Vector2d& x) const
  {
    const Vec g = charts.at(c).value(Vec(x));
    Eigen::Matrix2d m;
    m << g[0], g[1], g[1], g[2];
    return m;
  }
};

/// Flat metric on a single plane chart.
inline SurfaceMetric flat_plane()
{
  const MetricField g = make_field<ScalarKind>(ChartId{"plane"}, 2, 3, [](const JetTuple& x) {
    const int k = x[0].order();
    return JetTuple{Jet::constant(2, k, 1.0), Jet(2, k), Jet::constant(2, k, 1.0)};
  });
  return {"flat", Atlas::Plane, {g}};
}

/// Arbitrary metric on a single plane chart.
inline SurfaceMetric plane_metric(std::string name, MetricField g) { return {std::move(name), Atlas::Plane, {std::move(g)}}; }

/// Height z on the unit sphere in stereographic coordinates.
inline Jet stereographic_height(const JetTuple& u, int chart)
{
  const Jet r2 = u[0] * u[0] + u[1] * u[1];
  return chart == 0 ? (r2 - 1.0) / (r2 + 1.0) : (1.0 - r2) / (r2 + 1.0);
}

/// exp(2 sigma(z)) times the round metric, on the two-chart sphere atlas.
inline SurfaceMetric sphere_of_revolution(std::string name, std::function<Jet(const Jet&)> sigma)
{
  SurfaceMetric m{std::move(name), Atlas::Sphere, {}};
  for (int c = 0; c < 2; ++c) {
    m.charts.push_back(make_field<ScalarKind>(ChartId{m.name + (c == 0 ? ":N" : ":S")}, 2, 3, [sigma, c](const JetTuple& u) {
      const Jet r2 = u[0] * u[0] + u[1] * u[1];
      const Jet conf = 4.0 * exp(2.0 * sigma(stereographic_height(u, c))) / ((1.0 + r2) * (1.0 + r2));
      return JetTuple{conf, Jet(2, conf.order()), conf};
    }));
  }
  return m;
}

inline SurfaceMetric round_sphere()
{
  return sphere_of_revolution("round", [](const Jet& z) { return Jet(z.nvars(), z.order()); });
}

// ---------------------------------------------------------------------------
// Christoffel symbols and orthonormal frames on jets

namespace detail {

struct MetricJets {
  Jet g11, g12, g22;
  Jet at(int i, int j) const { return i == 0 && j == 0 ? g11 : (i == 1 && j == 1 ? g22 : g12); }
};

inline MetricJets metric_jets(const MetricField& g, const Vec& x, int order, int nvars)
{
  static constexpr int vm[2] = {0, 1};
  const JetTuple j = g.jets(x, order);
  auto lift = [&](const Jet& a) { return nvars == 2 ? a : a.embedded(nvars, std::span<const int>(vm, 2)); };
  return {lift(j[0]), lift(j[1]), lift(j[2])};
}

/// Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij), jets one order below g.
inline std::array<std::array<std::array<Jet, 2>, 2>, 2> christoffel_jets(const MetricJets& g)
{
  const int k = g.g11.order() - 1;
  const Jet det = g.g11.truncated(k) * g.g22.truncated(k) - g.g12.truncated(k) * g.g12.truncated(k);
  const Jet inv_det = reciprocal(det);
  const Jet ginv[2][2] = {{g.g22.truncated(k) * inv_det, -1.0 * g.g12.truncated(k) * inv_det},
                          {-1.0 * g.g12.truncated(k) * inv_det, g.g11.truncated(k) * inv_det}};
  std::array<std::array<std::array<Jet, 2>, 2>, 2> gamma;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Jet s(g.g11.nvars(), k);
        for (int l = 0; l < 2; ++l)
          s += 0.5 * ginv[a][l] * (g.at(l, j).derivative(i) + g.at(l, i).derivative(j) - g.at(i, j).derivative(l));
        gamma[a][i][j] = s;
      }
  return gamma;
}

/// g-orthonormal frame e1 = d1 / sqrt(g11), e2 = (-g12, g11) / sqrt(g11 det g).
inline std::array<JetTuple, 2> orthonormal_frame(const MetricJets& g)
{
  const Jet s11 = sqrt(g.g11);
  const Jet det = g.g11 * g.g22 - g.g12 * g.g12;
  const Jet n2 = reciprocal(sqrt(g.g11 * det));
  const int k = g.g11.order();
  return {JetTuple{reciprocal(s11), Jet(g.g11.nvars(), k)}, JetTuple{-1.0 * g.g12 * n2, g.g11 * n2}};
}

inline Jet metric_pair(const MetricJets& g, const JetTuple& a, const JetTuple& b)
{
  return g.g11 * a[0] * b[0] + g.g12 * (a[0] * b[1] + a[1] * b[0]) + g.g22 * a[1] * b[1];
}

}  // namespace detail

/// Gamma^k_ij at x in chart c, indexed [k][i][j].
inline std::array<std::array<std::array<double, 2>, 2>, 2> christoffel(const SurfaceMetric& m, int c, const Eigen::Vector2d& x)
{
  const auto gam = detail::christoffel_jets(detail::metric_jets(m.charts.at(c), Vec(x), 1, 2));
  std::array<std::array<std::array<double, 2>, 2>, 2> out;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out[a][i][j] = gam[a][i][j].value();
  return out;
}

/**
 * Geodesic pair on the unit tangent chart of chart c: V0 = d/dpsi and V1 the
 * unit-speed geodesic spray (v, -omega(v)) with omega(v) = g(nabla_v e1, e2).
 * The contact form is the metric dual of the unit normal n = -sin psi e1 + cos psi e2.
 */
inline ParallelizedContact geodesic_pair(const SurfaceMetric& m, int c = 0)
{
  const MetricField g = m.charts.at(c);
  const ChartId st = m.tangent_chart(c);
  const VectorField v0 = coordinate_field(st, 3, 2);
  const VectorField v1(st, 3, 3, g.max_order() - 1, [g](const Vec& q, int order) {
    const detail::MetricJets gj = detail::metric_jets(g, Vec(q.head(2)), order + 1, 3);
    if (!(gj.g11.value() > 0.0 && gj.g11.value() * gj.g22.value() - gj.g12.value() * gj.g12.value() > 0.0))
      throw GeometryError("geodesic_pair: metric not positive definite", q);
    const auto e = detail::orthonormal_frame(gj);
    const Jet psi = Jet::variable(3, order + 1, 2, q[2]);
    const Jet cs = cos(psi), sn = sin(psi);
    const JetTuple v{cs * e[0][0] + sn * e[1][0], cs * e[0][1] + sn * e[1][1]};
    const auto gam = detail::christoffel_jets(gj);
    JetTuple nabla(2, Jet(3, order));
    for (int a = 0; a < 2; ++a) {
      for (int i = 0; i < 2; ++i) {
        nabla[a] += v[i].truncated(order) * e[0][a].derivative(i);
        for (int j = 0; j < 2; ++j) nabla[a] += gam[a][i][j] * v[i].truncated(order) * e[0][j].truncated(order);
      }
    }
    detail::MetricJets gk{gj.g11.truncated(order), gj.g12.truncated(order), gj.g22.truncated(order)};
    const Jet omega = detail::metric_pair(gk, nabla, JetTuple{e[1][0].truncated(order), e[1][1].truncated(order)});
    return JetTuple{v[0].truncated(order), v[1].truncated(order), -1.0 * omega};
  });
  const OneForm alpha(st, 3, 3, g.max_order(), [g](const Vec& q, int order) {
    const detail::MetricJets gj = detail::metric_jets(g, Vec(q.head(2)), order, 3);
    const auto e = detail::orthonormal_frame(gj);
    const Jet psi = Jet::variable(3, order, 2, q[2]);
    const Jet cs = cos(psi), sn = sin(psi);
    const JetTuple n{-1.0 * sn * e[0][0] + cs * e[1][0], -1.0 * sn * e[0][1] + cs * e[1][1]};
    return JetTuple{gj.g11 * n[0] + gj.g12 * n[1], gj.g12 * n[0] + gj.g22 * n[1], Jet(3, order)};
  });
  return make_parallelized_contact(v0, v1, alpha);
}

// ---------------------------------------------------------------------------
// Contact elements, chart transitions and geodesic tracing

struct ContactElement {
  int chart = 0;
  Eigen::Vector3d coords;  ///< (x1, x2, psi)
};

/// Coordinate components of the unit vector at angle psi.
inline Eigen::Vector2d unit_vector(const SurfaceMetric& m, const ContactElement& e)
{
  const auto gj = detail::metric_jets(m.charts.at(e.chart), Vec(e.coords.head(2)), 0, 2);
  const auto f = detail::orthonormal_frame(gj);
  const double c = std::cos(e.coords[2]), s = std::sin(e.coords[2]);
  return {c * f[0][0].value() + s * f[1][0].value(), c * f[0][1].value() + s * f[1][1].value()};
}

/// Angle of the tangent vector v (coordinate components) in the orthonormal frame.
inline double frame_angle(const SurfaceMetric& m, int chart, const Eigen::Vector2d& x, const Eigen::Vector2d& v)
{
  const Eigen::Matrix2d g = m.matrix(chart, x);
  const auto f = detail::orthonormal_frame(detail::metric_jets(m.charts.at(chart), Vec(x), 0, 2));
  const Eigen::Vector2d e1(f[0][0].value(), f[0][1].value()), e2(f[1][0].value(), f[1][1].value());
  return std::atan2(e2.dot(g * v), e1.dot(g * v));
}

/// Contact element expressed in the other sphere chart.
inline ContactElement switch_chart(const SurfaceMetric& m, const ContactElement& e)
{
  if (m.atlas != Atlas::Sphere) throw std::invalid_argument("switch_chart: single-chart atlas");
  const Eigen::Vector2d u = e.coords.head(2);
  const double r2 = u.squaredNorm();
  if (r2 == 0.0) throw GeometryError("switch_chart: pole is not in the other chart", Vec(e.coords));
  const Eigen::Vector2d w = u / r2;
  const Eigen::Matrix2d jac = (Eigen::Matrix2d::Identity() * r2 - 2.0 * u * u.transpose()) / (r2 * r2);
  ContactElement out{1 - e.chart, {}};
  out.coords << w, frame_angle(m, out.chart, w, jac * unit_vector(m, e));
  return out;
}

inline ContactElement normalize_chart(const SurfaceMetric& m, const ContactElement& e)
{
  if (m.atlas == Atlas::Sphere && e.coords.head(2).norm() > 2.0) return switch_chart(m, e);
  return e;
}

/// Point and unit direction in R^3 (the plane sits in z = 0).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> embed_element(const SurfaceMetric& m, const ContactElement& e)
{
  const Eigen::Vector2d v = unit_vector(m, e);
  if (m.atlas == Atlas::Plane) {
    const Eigen::Vector3d d(v[0], v[1], 0.0);
    return {{e.coords[0], e.coords[1], 0.0}, d.normalized()};
  }
  JetTuple u = seed(std::span<const double>(e.coords.data(), 2), 1);
  const Jet r2 = u[0] * u[0] + u[1] * u[1];
  const Jet s = 1.0 / (r2 + 1.0);
  const JetTuple p{2.0 * u[0] * s, 2.0 * u[1] * s, stereographic_height(u, e.chart)};
  Eigen::Vector3d pt, dir;
  for (int i = 0; i < 3; ++i) {
    pt[i] = p[i].value();
    dir[i] = p[i].gradient(0) * v[0] + p[i].gradient(1) * v[1];
  }
  return {pt, dir.normalized()};
}

/// Contact element on the sphere atlas from a point of S^2 and a tangent direction.
inline ContactElement element_from_sphere(const SurfaceMetric& m, const Eigen::Vector3d& p, const Eigen::Vector3d& dir)
{
  const int chart = p.z() <= 0.0 ? 0 : 1;
  const double denom = chart == 0 ? 1.0 - p.z() : 1.0 + p.z();
  const Eigen::Vector2d u(p.x() / denom, p.y() / denom);
  // differential of the inverse stereographic map gives the coordinate velocity by least squares
  JetTuple uj = seed(std::span<const double>(u.data(), 2), 1);
  const Jet s = 1.0 / (uj[0] * uj[0] + uj[1] * uj[1] + 1.0);
  const JetTuple pj{2.0 * uj[0] * s, 2.0 * uj[1] * s, stereographic_height(uj, chart)};
  Eigen::Matrix<double, 3, 2> dp;
  for (int i = 0; i < 3; ++i) dp.row(i) << pj[i].gradient(0), pj[i].gradient(1);
  const Eigen::Vector2d v = dp.colPivHouseholderQr().solve(dir);
  ContactElement e{chart, {}};
  e.coords << u, frame_angle(m, chart, u, v);
  return e;
}

/// Integrates the geodesic spray by arclength across the atlas.
class GeodesicTracer {
 public:
  GeodesicTracer(const SurfaceMetric& m, double tol = 1e-12) : metric_(m), tol_(tol)
  {
    for (int c = 0; c < m.chart_count(); ++c) sprays_.push_back(geodesic_pair(m, c).v1);
  }

  const SurfaceMetric& metric() const { return metric_; }

  /// Element after arclength ds (any sign); chart switches happen between pieces of length <= max_piece.
  ContactElement advance(ContactElement e, double ds, double max_piece = 0.25) const
  {
    const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(ds) / max_piece)));
    for (int i = 0; i < pieces; ++i) {
      const VectorField& x = sprays_.at(e.chart);
      IntegratorOptions opts;
      opts.tol = tol_;
      const OdeRhs rhs = [&x](double, const Vec& y) { return x.value(y); };
      const IntegrationResult r = integrate(rhs, 0.0, Vec(e.coords), ds / pieces, opts);
      e.coords = r.y;
      e = normalize_chart(metric_, e);
    }
    return e;
  }

 private:
  SurfaceMetric metric_;
  double tol_;
  std::vector<VectorField> sprays_;
};

// ---------------------------------------------------------------------------
// Closedness

struct ClosednessSample {
  ContactElement start;
  bool returned = false;
  double return_arclength = 0.0;
  double defect = std::numeric_limits<double>::infinity();  ///< distance in R^6 between embedded elements
};

struct ClosednessReport {
  std::vector<ClosednessSample> samples;
  std::uint64_t seed = 0;
  double max_defect = 0.0;  ///< over returned samples
  int returned = 0;
};

struct ClosednessOptions {
  double max_arclength = 10.0;
  double tol = 1e-6;         ///< a return is a local minimum of the defect below this
  double step = 0.05;        ///< coarse scan step
  double leave_radius = 0.1; ///< the curve must first get this far from its start
  double capture = 0.2;      ///< coarse minima below this are refined
  double integrator_tol = 1e-12;
};

inline double element_distance(const SurfaceMetric& m, const ContactElement& a, const std::pair<Eigen::Vector3d, Eigen::Vector3d>& b)
{
  const auto ea = embed_element(m, a);
  return std::sqrt((ea.first - b.first).squaredNorm() + (ea.second - b.second).squaredNorm());
}

/// First return of the geodesic through `start` (golden-section refinement of coarse minima).
inline ClosednessSample trace_return(const GeodesicTracer& tracer, const ContactElement& start, const ClosednessOptions& opts)
{
  const SurfaceMetric& m = tracer.metric();
  const auto target = embed_element(m, start);
  ClosednessSample out{start};
  bool left = false;
  ContactElement prev = start, cur = start;
  double d_prev = 0.0, d_cur = 0.0, s = 0.0;
  while (s < opts.max_arclength) {
    const ContactElement next = tracer.advance(cur, opts.step);
    const double d_next = element_distance(m, next, target);
    left = left || d_next > opts.leave_radius;
    if (left && d_cur < d_prev && d_cur <= d_next && d_cur < opts.capture && s > opts.step) {
      // minimum bracketed in [s - step, s + step], starting from prev
      constexpr double kInvPhi = 0.6180339887498949;
      double a = 0.0, b = 2.0 * opts.step;
      double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
      double f1 = element_distance(m, tracer.advance(prev, x1), target);
      double f2 = element_distance(m, tracer.advance(prev, x2), target);
      while (b - a > 1e-11) {
        if (f1 < f2) {
          b = x2, x2 = x1, f2 = f1;
          x1 = b - kInvPhi * (b - a);
          f1 = element_distance(m, tracer.advance(prev, x1), target);
        } else {
          a = x1, x1 = x2, f1 = f2;
          x2 = a + kInvPhi * (b - a);
          f2 = element_distance(m, tracer.advance(prev, x2), target);
        }
      }
      const double sm = 0.5 * (a + b);
      const double dm = element_distance(m, tracer.advance(prev, sm), target);
      if (dm < opts.tol) {
        out.returned = true;
        out.return_arclength = s - opts.step + sm;
        out.defect = dm;
        return out;
      }
    }
    prev = cur, d_prev = d_cur;
    cur = next, d_cur = d_next;
    s += opts.step;
  }
  return out;
}

/// Random contact element: uniform on S^2 for sphere atlases, uniform in [-1, 1]^2 for the plane.
inline ContactElement random_element(const SurfaceMetric& m, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), box(-1.0, 1.0);
  if (m.atlas == Atlas::Plane) return {0, {box(rng), box(rng), ang(rng)}};
  std::normal_distribution<double> n;
  Eigen::Vector3d p(n(rng), n(rng), n(rng));
  p.normalize();
  const int chart = p.z() <= 0.0 ? 0 : 1;
  const double denom = chart == 0 ? 1.0 - p.z() : 1.0 + p.z();
  return {chart, {p.x() / denom, p.y() / denom, ang(rng)}};
}

inline ClosednessReport closedness_report(const SurfaceMetric& m, int n_samples, const ClosednessOptions& opts = {},
                                          std::uint64_t seed = 0)
{
  std::mt19937_64 rng(seed);
  const GeodesicTracer tracer(m, opts.integrator_tol);
  ClosednessReport rep;
  rep.seed = seed;
  for (int i = 0; i < n_samples; ++i) {
    ClosednessSample s = trace_return(tracer, random_element(m, rng), opts);
    if (s.returned) {
      ++rep.returned;
      rep.max_defect = std::max(rep.max_defect, s.defect);
    }
    rep.samples.push_back(std::move(s));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Central projection

struct LineFit {
  Eigen::Vector2d point, direction;  ///< centroid and unit direction
  double max_residual = 0.0;
};

/// Total-least-squares line through planar points.
inline LineFit fit_line(const std::vector<Eigen::Vector2d>& pts)
{
  if (pts.size() < 2) throw std::invalid_argument("fit_line: need two points");
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::MatrixX2d a(pts.size(), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(i) = (pts[i] - c).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixX2d> svd(a, Eigen::ComputeThinV);
  LineFit f{c, svd.matrixV().col(0), 0.0};
  const Eigen::Vector2d normal = svd.matrixV().col(1);
  for (const auto& p : pts) f.max_residual = std::max(f.max_residual, std::abs(normal.dot(p - c)));
  return f;
}

struct ProjectionArc {
  ContactElement start;
  std::vector<Eigen::Vector2d> projected;
  LineFit fit;
};

struct CentralProjectionReport {
  std::vector<ProjectionArc> arcs;
  double max_residual = 0.0;
};

/// Round-sphere geodesic through `start`, clipped to z > z_min, projected by (x, y, z) -> (x/z, y/z).
inline ProjectionArc project_arc(const GeodesicTracer& tracer, const ContactElement& start, double spacing, double z_min = 0.1)
{
  const SurfaceMetric& m = tracer.metric();
  ProjectionArc arc{start, {}, {}};
  std::vector<Eigen::Vector2d> back;
  for (double dir : {1.0, -1.0}) {
    ContactElement e = start;
    for (int k = 0; k < 10'000; ++k) {
      const Eigen::Vector3d p = embed_element(m, e).first;
      if (p.z() <= z_min) break;
      if (dir > 0 || k > 0) (dir > 0 ? arc.projected : back).emplace_back(p.x() / p.z(), p.y() / p.z());
      e = tracer.advance(e, dir * spacing);
    }
  }
  arc.projected.insert(arc.projected.begin(), back.rbegin(), back.rend());
  arc.fit = fit_line(arc.projected);
  return arc;
}

inline CentralProjectionReport central_projection_check(int n_geodesics, double spacing = 0.05, std::uint64_t seed = 0)
{
  const SurfaceMetric m = round_sphere();
  const GeodesicTracer tracer(m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  CentralProjectionReport rep;
  while (static_cast<int>(rep.arcs.size()) < n_geodesics) {
    Eigen::Vector3d p(n(rng), n(rng), n(rng));
    p.normalize();
    if (p.z() < 0.3) continue;
    Eigen::Vector3d d(n(rng), n(rng), n(rng));
    d = (d - d.dot(p) * p).normalized();
    rep.arcs.push_back(project_arc(tracer, element_from_sphere(m, p, d), spacing));
    rep.max_residual = std::max(rep.max_residual, rep.arcs.back().fit.max_residual);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Legendre ray map

/// Covector p = g(v, .) for the unit vector v along `ray`.
inline Eigen::Vector2d legendre_ray_map(const SurfaceMetric& m, int chart, const Eigen::Vector2d& x, const Eigen::Vector2d& ray)
{
  const Eigen::Matrix2d g = m.matrix(chart, x);
  if (!(g.determinant() > 0.0 && g(0, 0) > 0.0)) throw GeometryError("legendre_ray_map: degenerate metric", Vec(x));
  const double len = std::sqrt(ray.dot(g * ray));
  if (len == 0.0) throw std::invalid_argument("legendre_ray_map: zero ray");
  return g * ray / len;
}

/// Unit vector g^{-1} p / |p|.
inline Eigen::Vector2d legendre_ray_inverse(const SurfaceMetric& m, int chart, const Eigen::Vector2d& x, const Eigen::Vector2d& p)
{
  const Eigen::Matrix2d g = m.matrix(chart, x);
  if (!(g.determinant() > 0.0 && g(0, 0) > 0.0)) throw GeometryError("legendre_ray_inverse: degenerate metric", Vec(x));
  const Eigen::Vector2d v = g.inverse() * p;
  return v / std::sqrt(p.dot(v));
}

/// Image under (x, psi) -> (x, p) of the geodesic spray at a contact element.
inline Vec legendre_pushforward(const SurfaceMetric& m, const ContactElement& e)
{
  const ParallelizedContact pair = geodesic_pair(m, e.chart);
  const Vec q(e.coords);
  const Vec v1 = pair.v1.value(q);
  const JetTuple qj = seed(std::span<const double>(q.data(), 3), 1);
  const detail::MetricJets gj = detail::metric_jets(m.charts.at(e.chart), q.head(2), 1, 3);
  const auto f = detail::orthonormal_frame(gj);
  const Jet c = cos(qj[2]), s = sin(qj[2]);
  const JetTuple v{c * f[0][0] + s * f[1][0], c * f[0][1] + s * f[1][1]};
  const Jet p[2] = {gj.g11 * v[0] + gj.g12 * v[1], gj.g12 * v[0] + gj.g22 * v[1]};
  Vec out(4);
  out << v1[0], v1[1], 0.0, 0.0;
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < 3; ++i) out[2 + a] += p[a].gradient(i) * v1[i];
  return out;
}

/// Kinetic-energy Hamiltonian field of H = g^{ij} p_i p_j / 2 at (x, p), with d g^{-1} = -g^{-1} dg g^{-1}.
inline Vec kinetic_hamiltonian_field(const SurfaceMetric& m, int chart, const Eigen::Vector2d& x, const Eigen::Vector2d& p)
{
  const JetTuple gj = m.charts.at(chart).jets(Vec(x), 1);
  Eigen::Matrix2d g, dg[2];
  g << gj[0].value(), gj[1].value(), gj[1].value(), gj[2].value();
  for (int k = 0; k < 2; ++k) dg[k] << gj[0].gradient(k), gj[1].gradient(k), gj[1].gradient(k), gj[2].gradient(k);
  const Eigen::Matrix2d gi = g.inverse();
  Vec out(4);
  out.head(2) = gi * p;
  for (int k = 0; k < 2; ++k) out[2 + k] = 0.5 * p.dot(gi * dg[k] * gi * p);
  return out;
}

// ---------------------------------------------------------------------------
// SO(3) x S^1

/**
 * Left-invariant fields on SO(3) in the unit-quaternion chart (q1, q2, q3, theta)
 * with q0 = sqrt(1 - |q|^2) > 0, so the chart covers rotations by less than pi
 * and the sign ambiguity of quaternions is resolved by q0 > 0. The field for
 * omega in R^3 is q' = q (0, omega) / 2, i.e. v' = (q0 omega + v x omega) / 2.
 * With I, J, K the fields for e1, e2, e3 the bracket convention is
 * [I, J] = K, [J, K] = I, [K, I] = J.
 */
struct SO3Frame {
  ChartId chart;
  VectorField i, j, k;
  DistributionFrame frame;  ///< {d/dtheta, cos theta K + sin theta I}
};

inline VectorField so3_left_invariant(const ChartId& chart, int axis)
{
  return make_vector_field(chart, 4, [axis](const JetTuple& q) {
    const int ord = q[0].order();
    const Jet q0 = sqrt(1.0 - (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]));
    JetTuple w(3, Jet(4, ord));
    w[axis] = Jet::constant(4, ord, 1.0);
    const JetTuple v{q[0], q[1], q[2]};
    const JetTuple vxw = cross(v, w);
    return JetTuple{0.5 * (q0 * w[0] + vxw[0]), 0.5 * (q0 * w[1] + vxw[1]), 0.5 * (q0 * w[2] + vxw[2]), Jet(4, ord)};
  });
}

inline SO3Frame so3_engel_frame()
{
  const ChartId ch{"SO3xS1"};
  const VectorField i = so3_left_invariant(ch, 0), j = so3_left_invariant(ch, 1), k = so3_left_invariant(ch, 2);
  const VectorField rot(ch, 4, 4, std::min(k.max_order(), i.max_order()), [k, i](const Vec& q, int order) {
    const Jet th = Jet::variable(4, order, 3, q[3]);
    const Jet c = cos(th), s = sin(th);
    const JetTuple kj = k.jets(q, order), ij = i.jets(q, order);
    JetTuple r;
    for (int a = 0; a < 4; ++a) r.push_back(c * kj[a] + s * ij[a]);
    return r;
  });
  return {ch, i, j, k, DistributionFrame({coordinate_field(ch, 4, 3), rot})};
}

/// Rotation matrix of the chart point, as jets in the chart variables.
inline std::array<JetTuple, 3> so3_rotation_jets(const Vec& q, int order)
{
  const JetTuple v = seed(std::span<const double>(q.data(), 4), order);
  const Jet w = sqrt(1.0 - (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
  const Jet &x = v[0], &y = v[1], &z = v[2];
  // columns R e1, R e2, R e3
  return {JetTuple{1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)},
          JetTuple{2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z + w * x)},
          JetTuple{2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)}};
}

/// Contact element (g e3, g e1) of S^2 for a chart point.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> so3_unit_tangent(const Vec& q)
{
  const auto r = so3_rotation_jets(q, 0);
  return {{r[2][0].value(), r[2][1].value(), r[2][2].value()}, {r[0][0].value(), r[0][1].value(), r[0][2].value()}};
}

/// Derivative of the base point g e3 along a chart vector field.
inline Eigen::Vector3d so3_base_velocity(const VectorField& x, const Vec& q)
{
  const auto r = so3_rotation_jets(q, 1);
  const Vec xv = x.value(q);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int a = 0; a < 3; ++a)
    for (int v = 0; v < 4; ++v) out[a] += r[2][a].gradient(v) * xv[v];
  return out;
}

}  // namespace engel
