// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file deformation.hpp
 * @brief Engel deformations of standard domains realizing contact isotopies,
 *        and the Gray/Moser solver for plane-field families with a fixed
 *        Legendrian line.
 *
 * A generator is a contact Hamiltonian h(m, theta) on the product chart. With
 * the contact form rescaled so that d alpha(V0, V1) = 1 and Z its Reeb field,
 * the generating field is X = h Z + X_h with X_h = -dh(V1) V0 + dh(V0) V1, the
 * unique X_h in ker(alpha) with dh + i_{X_h} d alpha = 0 on ker(alpha).
 */

#include "engel/core/field.hpp"
#include "engel/core/integrator.hpp"
#include "engel/core/linalg.hpp"
#include "engel/distributions.hpp"
#include "engel/prolongation.hpp"

#include <numbers>
#include <span>
#include <vector>

namespace engel {

namespace detail {

inline Jet lift_jet(const Jet& j, int nvars)
{
  static constexpr int vm[3] = {0, 1, 2};
  return j.embedded(nvars, std::span<const int>(vm, 3));
}

/// (d alpha)_{ij} = d_i alpha_j - d_j alpha_i as jets of one order less.
inline std::vector<std::vector<Jet>> d_form(const JetTuple& a, int dim)
{
  std::vector<std::vector<Jet>> d(dim, std::vector<Jet>(dim));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) d[i][j] = a[j].derivative(i) - a[i].derivative(j);
  return d;
}

inline Jet pair_form(const std::vector<std::vector<Jet>>& d, const JetTuple& u, const JetTuple& v)
{
  const int n = static_cast<int>(u.size());
  const int k = std::min({tuple_order(u), tuple_order(v), d[0][0].order()});
  Jet s(u[0].nvars(), k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) s += d[i][j] * u[i] * v[j];
  return s;
}

}  // namespace detail

/// Contact form alpha / d alpha(V0, V1) and its Reeb field.
struct NormalizedContact {
  OneForm alpha;        ///< normalized so that d alpha(V0, V1) = 1
  VectorField reeb;
  ScalarField multiplier;  ///< 1 / d alpha_original(V0, V1)
};

inline NormalizedContact normalize_contact_form(const ParallelizedContact& c)
{
  const OneForm a = c.annihilator();
  const VectorField v0 = c.v0, v1 = c.v1;
  const int top = std::min({a.max_order() - 1, v0.max_order(), v1.max_order()});
  const ScalarField mult(c.chart(), 3, 1, top, [a, v0, v1](const Vec& p, int order) {
    const auto d = detail::d_form(a.jets(p, order + 1), 3);
    const Jet w = detail::pair_form(d, v0.jets(p, order), v1.jets(p, order));
    if (w.value() == 0.0) throw GeometryError("normalize_contact_form: d alpha degenerate on the contact planes", p);
    return JetTuple{reciprocal(w)};
  });
  const OneForm scaled(c.chart(), 3, 3, top, [a, mult](const Vec& p, int order) {
    const JetTuple j = a.jets(p, order);
    const Jet m = mult.jets(p, order)[0];
    JetTuple r;
    for (const auto& c : j) r.push_back(m * c);
    return r;
  });
  return {scaled, reeb_vector_field(scaled), mult};
}

namespace detail {

/// h Z - dh(V1) V0 + dh(V0) V1 with dh taken over the first three variables.
inline JetTuple hamiltonian_jets(const Jet& h, const JetTuple& z, const JetTuple& v0, const JetTuple& v1)
{
  const int k = h.order() - 1;
  Jet dh_v0(h.nvars(), k), dh_v1(h.nvars(), k);
  for (int i = 0; i < 3; ++i) {
    dh_v0 += h.derivative(i) * v0[i];
    dh_v1 += h.derivative(i) * v1[i];
  }
  const Jet hk = h.truncated(k);
  JetTuple x;
  for (int i = 0; i < 3; ++i) x.push_back(hk * z[i] - dh_v1 * v0[i] + dh_v0 * v1[i]);
  return x;
}

}  // namespace detail

/// Contact vector field of a Hamiltonian h on M for the normalized form.
inline VectorField contact_hamiltonian_field(const ScalarField& h, const ParallelizedContact& c)
{
  detail::require_same_chart(h, c.v0);
  const NormalizedContact nc = normalize_contact_form(c);
  const VectorField z = nc.reeb, v0 = c.v0, v1 = c.v1;
  const int top = std::min({h.max_order() - 1, z.max_order(), v0.max_order(), v1.max_order()});
  return VectorField(c.chart(), 3, 3, top, [h, z, v0, v1](const Vec& p, int order) {
    return detail::hamiltonian_jets(h.jets(p, order + 1)[0], z.jets(p, order), v0.jets(p, order), v1.jets(p, order));
  });
}

/// Contact Hamiltonian h(m, theta) on the product chart, supported in theta-interval (lo, hi).
struct ContactIsotopyGenerator {
  ScalarField h;
  double support_lo = 0.0;
  double support_hi = std::numbers::pi / 2;
};

/// C-infinity bump exp(1/4w^2 - 1/s) * exp(...) normalized to peak 1, s = (t - lo)(hi - t).
inline Jet bump_jet(const Jet& t, double lo, double hi)
{
  const double tv = t.value();
  if (!(tv > lo && tv < hi)) return Jet(t.nvars(), t.order());
  const double w = 0.5 * (hi - lo);
  const Jet s = (t - lo) * (hi - t);
  return exp(1.0 / (w * w) - reciprocal(s));
}

/// Generator amplitude * bump(theta) * eta(m), supported in (lo, hi).
inline ContactIsotopyGenerator bump_generator(const ChartId& product, const ScalarField& eta, double lo, double hi,
                                              double amplitude = 1.0)
{
  if (!(0.0 < lo && lo < hi && hi < std::numbers::pi / 2))
    throw std::invalid_argument("bump_generator: support must lie strictly inside (0, pi/2)");
  const ScalarField h(product, 4, 1, eta.max_order(), [eta, lo, hi, amplitude](const Vec& q, int order) {
    const Jet b = bump_jet(Jet::variable(4, order, 3, q[3]), lo, hi);
    if (b.max_abs() == 0.0) return JetTuple{Jet(4, order)};
    const Jet e = detail::lift_jet(eta.jets(Vec(q.head(3)), order)[0], 4);
    return JetTuple{amplitude * b * e};
  });
  return {h, lo, hi};
}

inline ContactIsotopyGenerator scaled(const ContactIsotopyGenerator& g, double factor)
{
  const ScalarField h = g.h;
  return {ScalarField(h.chart(), 4, 1, h.max_order(),
                      [h, factor](const Vec& q, int order) { return JetTuple{factor * h.jets(q, order)[0]}; }),
          g.support_lo, g.support_hi};
}

/// X(theta, m) on the product chart (zero theta-component).
inline VectorField generator_field(const EngelDomain& dom, const ContactIsotopyGenerator& gen)
{
  if (!(gen.h.chart() == dom.chart)) throw std::invalid_argument("generator_field: Hamiltonian must live on the product chart");
  const NormalizedContact nc = normalize_contact_form(dom.base);
  const VectorField z = nc.reeb, v0 = dom.base.v0, v1 = dom.base.v1;
  const ScalarField h = gen.h;
  const int top = std::min({h.max_order() - 1, z.max_order(), v0.max_order(), v1.max_order()});
  return VectorField(dom.chart, 4, 4, top, [h, z, v0, v1](const Vec& q, int order) {
    const Jet hj = h.jets(q, order + 1)[0];
    if (hj.max_abs() == 0.0) return JetTuple(4, Jet(4, order));
    const Vec m = q.head(3);
    auto lift = [](const JetTuple& t) {
      JetTuple r;
      for (const auto& c : t) r.push_back(detail::lift_jet(c, 4));
      return r;
    };
    JetTuple x = detail::hamiltonian_jets(hj, lift(z.jets(m, order)), lift(v0.jets(m, order)), lift(v1.jets(m, order)));
    x.push_back(Jet(4, order));
    return x;
  });
}

struct DeformedEngel {
  EngelDomain base;
  ContactIsotopyGenerator generator;
  VectorField x;          ///< generating field on the product chart
  EngelDomain structure;  ///< frame {W = d/dtheta + X, V}, leaf field W
  ScalarField g;          ///< [X, V] = f V + g U + e Z
};

/// Coefficients (f, g, e) of [X, V] in the basis (V, U, Z) at q.
inline Vec bracket_coefficients(const DeformedEngel& d, const Vec& q)
{
  const VectorField u = rotating_field(d.base.base, d.base.chart, std::numbers::pi / 2);
  const Vec xv = lie_bracket(d.x, d.base.slice_tangent).value(q).head(3);
  Mat basis(3, 3);
  basis << d.base.slice_tangent.value(q).head(3), u.value(q).head(3), normalize_contact_form(d.base.base).reeb.value(q.head(3));
  return basis.colPivHouseholderQr().solve(xv);
}

/// Deformed structure without the g > -1 check.
inline DeformedEngel deform(const EngelDomain& dom, const ContactIsotopyGenerator& gen)
{
  if (dom.range != ThetaRange::QuarterTurn) throw std::invalid_argument("deform: expects a quarter-turn domain");
  if (!(0.0 < gen.support_lo && gen.support_lo < gen.support_hi && gen.support_hi < std::numbers::pi / 2))
    throw std::invalid_argument("deform: generator support must lie strictly inside (0, pi/2)");
  const VectorField x = generator_field(dom, gen);
  const VectorField w = coordinate_field(dom.chart, 4, EngelDomain::kThetaAxis) + x;
  EngelDomain s = dom;
  s.frame = DistributionFrame({w, dom.slice_tangent});
  s.leaf_hint = w;
  DeformedEngel out{dom, gen, x, s, ScalarField()};

  const VectorField v = dom.slice_tangent;
  const VectorField u = rotating_field(dom.base, dom.chart, std::numbers::pi / 2);
  const VectorField bracket = lie_bracket(x, v);
  const VectorField z = normalize_contact_form(dom.base).reeb;
  out.g = ScalarField(dom.chart, 4, 1, std::min(bracket.max_order(), z.max_order()), [=](const Vec& q, int order) {
    const JetTuple b = bracket.jets(q, order), vj = v.jets(q, order), uj = u.jets(q, order);
    const JetTuple zj = z.jets(Vec(q.head(3)), order);
    // Cramer's rule for b = f V + g U + e Z on the first three components
    std::vector<JetTuple> cols{{vj[0], vj[1], vj[2]}, {uj[0], uj[1], uj[2]}, {}};
    for (const auto& c : zj) cols[2].push_back(detail::lift_jet(c, 4));
    const Jet den = det_jets(cols);
    cols[1] = {b[0], b[1], b[2]};
    return JetTuple{det_jets(cols) / den};
  });
  return out;
}

/// Spin measure (V ^ [X, V]) / (V0 ^ V1) of the contact planes at q.
inline double spin_measure(const DeformedEngel& d, const Vec& q)
{
  const Eigen::Vector3d v = d.base.slice_tangent.value(q).head(3);
  const Eigen::Vector3d xv = lie_bracket(d.x, d.base.slice_tangent).value(q).head(3);
  const Eigen::Vector3d a0 = d.base.base.v0.value(q.head(3)), a1 = d.base.base.v1.value(q.head(3));
  const Eigen::Vector3d area = a0.cross(a1);
  return v.cross(xv).dot(area) / area.squaredNorm();
}

/// Realization of the contact isotopy generated by `gen`; throws at the first
/// sample where g <= -1.
inline DeformedEngel realize_isotopy(const EngelDomain& dom, const ContactIsotopyGenerator& gen, std::span<const Vec> samples = {})
{
  DeformedEngel d = deform(dom, gen);
  for (const Vec& q : samples)
    if (!(d.g.value(q)[0] > -1.0)) throw GeometryError("realize_isotopy: g <= -1 (deformation too large)", q);
  return d;
}

/// M-component of the time-pi/2 flow of W from (m, 0).
inline Point bottom_to_top(const DeformedEngel& d, const Point& m, double tol = 1e-11)
{
  if (!(m.chart == d.base.base.chart())) throw std::invalid_argument("bottom_to_top: point must be on the base chart");
  const FlowResult r = flow(d.structure.frame[0], d.base.at(m.coords, 0.0), std::numbers::pi / 2, tol);
  return Point(m.chart, r.endpoint.coords.head(3));
}

// ---------------------------------------------------------------------------
// Gray/Moser

struct GrayOptions {
  double hypothesis_tol = 1e-9;  ///< |theta_t(L)| and |d theta_t / dt (L)|, relative
  bool check_hypothesis = true;
};

struct GrayTrajectory {
  Vec start;
  std::vector<Vec> points;        ///< phi_t(start) on the t-grid
  std::vector<Mat> jacobians;     ///< D phi_t(start)
  std::vector<double> log_scale;  ///< g(t, phi_t(start)) = log f_t
};

struct GraySolution {
  OneForm family;       ///< theta_t as a 3-component form on the (m, t) chart
  VectorField legendrian;
  VectorField generator;  ///< X_t on the (m, t) chart, 3 components
  std::vector<double> t_grid;
  std::vector<GrayTrajectory> trajectories;
  double max_plane_defect = 0.0;      ///< angle between D phi_t(xi_0) and xi_t
  double max_line_defect = 0.0;       ///< angle between D phi_t(L) and L
  double max_transverse = 0.0;        ///< component of X_t off L
  double max_conformal_defect = 0.0;  ///< |f_t theta_t(D phi_t) - theta_0|, relative

  GrayTrajectory trajectory(const Vec& x0) const;
};

namespace detail {

struct GrayPointSolve {
  JetTuple x;
  Jet transverse;
  Jet theta_dot_reeb;
};

/// Pointwise horizontal solve i_X d theta|xi = -theta_dot|xi in the basis (L, n x L).
inline GrayPointSolve gray_point(const JetTuple& th4, const JetTuple& l4, int order)
{
  // th4: theta jets in (m, t), order + 1; l4: L jets lifted, order
  JetTuple th, thdot;
  for (const auto& c : th4) {
    th.push_back(c.truncated(order));
    thdot.push_back(c.derivative(3));
  }
  const auto d = d_form(th4, 3);
  const JetTuple e2 = cross(th, l4);
  const Jet den = pair_form(d, l4, e2);
  const Jet a = -1.0 * dot(thdot, e2) / den;
  const Jet b = dot(thdot, l4) / den;
  JetTuple x;
  for (int i = 0; i < 3; ++i) x.push_back(a * l4[i] + b * e2[i]);
  JetTuple curl{d[1][2], d[2][0], d[0][1]};
  const Jet vol = dot(th, curl);
  const Jet h = dot(thdot, curl) / vol;
  Jet tr(b.nvars(), b.order());
  tr = b * sqrt(dot(e2, e2));
  return {x, tr, h};
}

}  // namespace detail

/// X_t on the (m, t) chart.
inline VectorField gray_generator(const OneForm& family, const VectorField& l)
{
  const int top = std::min(family.max_order() - 1, l.max_order());
  return VectorField(family.chart(), 4, 3, top, [family, l](const Vec& q, int order) {
    JetTuple l4;
    for (const auto& c : l.jets(Vec(q.head(3)), order)) l4.push_back(detail::lift_jet(c, 4));
    return detail::gray_point(family.jets(q, order + 1), l4, order).x;
  });
}

namespace detail {

/// Pullback defects at one point of one trajectory.
inline void gray_defects(const OneForm& family, const VectorField& l, const Vec& x0, const Vec& xt, const Mat& jac, double t,
                         double log_f, GraySolution& sol)
{
  Vec q0(4), qt(4);
  q0 << x0, 0.0;
  qt << xt, t;
  const Vec th0 = family.value(q0), tht = family.value(qt);
  const Vec l0 = l.value(x0), lt = l.value(xt);
  // xi_0 basis and its image
  Mat xi0(3, 2);
  xi0 << l0, Vec(Eigen::Vector3d(th0).cross(Eigen::Vector3d(l0)));
  Mat xit(3, 2);
  xit << lt, Vec(Eigen::Vector3d(tht).cross(Eigen::Vector3d(lt)));
  sol.max_plane_defect = std::max(sol.max_plane_defect, max_principal_angle(jac * xi0, xit));
  sol.max_line_defect = std::max(sol.max_line_defect, line_angle(jac * l0, lt));
  const Vec pulled = std::exp(log_f) * (jac.transpose() * tht);
  sol.max_conformal_defect = std::max(sol.max_conformal_defect, (pulled - th0).norm() / th0.norm());
}

}  // namespace detail

/**
 * Gray/Moser isotopy for a family theta_t whose kernels all contain the line
 * field L. Integrates the flow of X_t with its variational equation and the
 * scale log f_t by classical RK4 on t_grid, solving for X_t at the current
 * state in every stage. The scale obeys d/dt log f(t, phi_t(x)) = -h with
 * h = (d theta_t / dt)(R_t). t_grid starts at 0 and may run backwards.
 */
inline GraySolution gray_solve(const OneForm& family, const VectorField& l, std::vector<double> t_grid, std::span<const Vec> samples,
                               const GrayOptions& opts = {})
{
  if (family.dim() != 4 || family.components() != 3) throw std::invalid_argument("gray_solve: family must be a 3-form field on (m, t)");
  if (l.dim() != 3) throw std::invalid_argument("gray_solve: L must be a field on the 3-chart");
  if (t_grid.size() < 2 || t_grid.front() != 0.0) throw std::invalid_argument("gray_solve: t_grid must start at 0 and have two points");
  const double dir = t_grid[1] > 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(dir * (t_grid[i] - t_grid[i - 1]) > 0.0)) throw std::invalid_argument("gray_solve: t_grid must be strictly monotone");

  GraySolution sol{family, l, gray_generator(family, l), t_grid, {}};

  auto check_hypothesis = [&](const Vec& x, double t) {
    Vec q(4);
    q << x, t;
    const JetTuple th = family.jets(q, 1);
    const Vec lv = l.value(x);
    double on_l = 0.0, dot_l = 0.0, scale = 0.0;
    for (int i = 0; i < 3; ++i) {
      on_l += th[i].value() * lv[i];
      dot_l += th[i].gradient(3) * lv[i];
      scale = std::hypot(scale, th[i].value());
    }
    scale *= lv.norm();
    if (std::abs(on_l) > opts.hypothesis_tol * scale) throw GeometryError("gray_solve: L is not contained in ker theta_t", q);
    if (std::abs(dot_l) > opts.hypothesis_tol * scale) throw GeometryError("gray_solve: d theta_t/dt does not annihilate L", q);
  };

  // state: [x (3), D phi (9, column-major), log f (1)]
  auto rhs = [&](double t, const Vec& s) {
    Vec q(4);
    q << s.head(3), t;
    JetTuple l4;
    for (const auto& c : l.jets(Vec(s.head(3)), 1)) l4.push_back(detail::lift_jet(c, 4));
    const detail::GrayPointSolve p = detail::gray_point(family.jets(q, 2), l4, 1);
    if (!std::isfinite(p.x[0].value())) throw GeometryError("gray_solve: contact degeneration along the path", q);
    Vec ds(13);
    Mat a(3, 3);
    for (int i = 0; i < 3; ++i) {
      ds[i] = p.x[i].value();
      for (int j = 0; j < 3; ++j) a(i, j) = p.x[i].gradient(j);
    }
    const Mat jac = Eigen::Map<const Mat>(s.data() + 3, 3, 3);
    const Mat djac = a * jac;
    for (int j = 0; j < 9; ++j) ds[3 + j] = djac.data()[j];
    ds[12] = -p.theta_dot_reeb.value();
    sol.max_transverse = std::max(sol.max_transverse, std::abs(p.transverse.value()));
    return ds;
  };

  for (const Vec& x0 : samples) {
    GrayTrajectory tr;
    tr.start = x0;
    Vec s(13);
    s << x0, Eigen::Map<const Vec>(Mat::Identity(3, 3).eval().data(), 9), 0.0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      if (i > 0) s = detail::rk4_step(rhs, t_grid[i - 1], s, t_grid[i] - t_grid[i - 1]);
      if (opts.check_hypothesis) check_hypothesis(s.head(3), t_grid[i]);
      tr.points.push_back(s.head(3));
      tr.jacobians.push_back(Eigen::Map<const Mat>(s.data() + 3, 3, 3));
      tr.log_scale.push_back(s[12]);
      detail::gray_defects(family, l, x0, tr.points.back(), tr.jacobians.back(), t_grid[i], s[12], sol);
    }
    sol.trajectories.push_back(std::move(tr));
  }
  return sol;
}

inline GrayTrajectory GraySolution::trajectory(const Vec& x0) const
{
  const std::vector<Vec> one{x0};
  GrayOptions opts;
  opts.check_hypothesis = false;
  return gray_solve(family, legendrian, t_grid, one, opts).trajectories.front();
}

}  // namespace engel
