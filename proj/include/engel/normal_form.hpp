// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file normal_form.hpp
 * @brief Jet-level normal form of a pair of transverse Legendrian line fields,
 *        and the correspondence with second-order ODEs y'' = f(x, y, p).
 *
 * Normal-form coordinates are (x, y, z) with Y = d/dy and
 * X = d/dx + y d/dz + f d/dy. ODE coordinates are (x, y, p) with
 * V0 = d/dp and V1 = d/dx + p d/dy + f d/dp. The two are related by the
 * relabelling (x, y, z)_normal = (x, p, y)_ode.
 */

#include "engel/core/field.hpp"
#include "engel/core/jet.hpp"
#include "engel/core/linalg.hpp"
#include "engel/prolongation.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace engel {

/// Spanning fields of the two line fields as jets at the origin, variables (x, y, z).
struct LegendrianPairJet {
  JetTuple y;  ///< spans l0
  JetTuple x;  ///< spans l1

  int order() const { return std::min(tuple_order(y), tuple_order(x)); }
};

struct NormalFormStep {
  std::string name;
  std::string detail;
};

struct NormalFormResult {
  JetTuple change;   ///< old coordinates -> normal-form coordinates, order k
  Jet y_scale;       ///< positive at 0; D(change)(y_scale Y) = d/dy
  Jet x_scale;       ///< positive at 0; D(change)(x_scale X) = d/dx + y d/dz + f d/dy
  Jet f;             ///< in normal-form coordinates, order k - 1
  std::vector<NormalFormStep> steps;
};

struct NormalizeOptions {
  /// Apply the extra shift y -> y - f(0) x, z -> z - f(0) x^2 / 2 so that f(0) = 0.
  bool zero_constant = true;
  /// Relative threshold below which f_1(0) and the contact twist count as zero.
  double zero_tol = 1e-12;
};

namespace detail {

inline std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline JetTuple truncate_all(const JetTuple& t, int order)
{
  JetTuple r;
  for (const auto& j : t) r.push_back(j.truncated(order));
  return r;
}

}  // namespace detail

/// D(change) . v as jets in the original variables; exact to min(k - 1, order(v)).
inline JetTuple pushforward(const JetTuple& change, const JetTuple& v)
{
  JetTuple r;
  for (const auto& c : change) {
    const int n = c.nvars();
    Jet s(n, std::min(c.order() - 1, tuple_order(v)));
    for (int j = 0; j < n; ++j) s += c.derivative(j) * v[j];
    r.push_back(std::move(s));
  }
  return r;
}

/// Lie derivative v(g) of a scalar jet.
inline Jet lie_derivative(const JetTuple& v, const Jet& g)
{
  Jet s(g.nvars(), std::min(g.order() - 1, tuple_order(v)));
  for (int j = 0; j < g.nvars(); ++j) s += g.derivative(j) * v[j];
  return s;
}

/// The field v expressed in the coordinates y = change(x): (D change . v) o change^{-1}.
inline JetTuple transform_field(const JetTuple& change, const JetTuple& v)
{
  const JetTuple pushed = pushforward(change, v);
  const JetTuple inv = detail::truncate_all(jet_invert(change), tuple_order(pushed));
  return jet_compose(pushed, inv);
}

struct StraightenResult {
  JetTuple change;  ///< order k + 1
  int axis = 1;     ///< original coordinate that became y
  double sign = 1.0;
};

/**
 * Flow-box coordinates for Y at the origin: the new y is +-q_j (j the dominant
 * component of Y(0), y preferred on ties) and the other two coordinates are
 * first integrals u_i of Y with u_i = q_i on {q_j = 0}, found by Picard
 * iteration u = q_i - int_0^{q_j} sum_i a_i d_i u for Y / Y_j = d_j + sum a_i d_i.
 */
inline StraightenResult straighten_detailed(const JetTuple& y)
{
  if (y.size() != 3 || y[0].nvars() != 3) throw std::invalid_argument("straighten: expects a 3-component jet in 3 variables");
  const int k = tuple_order(y);
  if (k + 1 > kMaxJetOrder) throw std::invalid_argument("straighten: jet order too high (at most 5)");
  int j = 1;
  for (int i : {0, 2})
    if (std::abs(y[i].value()) > std::abs(y[j].value())) j = i;
  if (y[j].value() == 0.0) throw GeometryError("straighten: Y vanishes at the origin", Vec::Zero(3));

  const Jet inv = reciprocal(y[j]);
  const JetTuple id = identity_jet(3, k + 1);
  std::vector<int> others;
  for (int i = 0; i < 3; ++i)
    if (i != j) others.push_back(i);

  StraightenResult r;
  r.axis = j;
  r.sign = y[j].value() > 0.0 ? 1.0 : -1.0;
  r.change.resize(3);
  r.change[1] = r.sign * id[j];
  for (int slot = 0; slot < 2; ++slot) {
    const int i = others[slot];
    Jet u = id[i];
    for (int it = 0; it < k + 2; ++it) {
      Jet rate(3, k);
      for (int a : others) rate += (y[a] * inv) * u.derivative(a);
      u = id[i] - rate.integral(j);
    }
    r.change[slot == 0 ? 0 : 2] = u;
  }
  return r;
}

inline JetTuple straighten(const JetTuple& y) { return straighten_detailed(y).change; }

/// Checks {Y, X, [Y, X]} are independent at the origin.
inline void require_contact_at_origin(const LegendrianPairJet& pair, double tol = 1e-10)
{
  Mat m(3, 3);
  for (int i = 0; i < 3; ++i) {
    m(i, 0) = pair.y[i].value();
    m(i, 1) = pair.x[i].value();
    m(i, 2) = lie_derivative(pair.y, pair.x[i]).value() - lie_derivative(pair.x, pair.y[i]).value();
  }
  const Vec sv = singular_values(m);
  if (!(sv[2] > tol * sv[0])) throw GeometryError("normalize_pair: pair is not contact at the origin", Vec::Zero(3));
}

/**
 * Normal form of a Legendrian pair to order k - 1. Steps: straighten Y; orient
 * and normalize X (swapping x and z if its x-component vanishes); shift away
 * the constant terms of its y- and z-components; orient the contact twist;
 * take the new y to be the z-component f_3 of X; optionally shift f(0) to 0.
 */
inline NormalFormResult normalize_pair(const LegendrianPairJet& pair, const NormalizeOptions& opts = {})
{
  if (pair.y.size() != 3 || pair.x.size() != 3) throw std::invalid_argument("normalize_pair: fields must have 3 components");
  require_contact_at_origin(pair);
  const int k = pair.order();
  if (k < 2) throw std::invalid_argument("normalize_pair: jet order must be at least 2");
  NormalFormResult res;
  const JetTuple yk = detail::truncate_all(pair.y, k), xk = detail::truncate_all(pair.x, k);

  // Step 1: straighten Y
  const StraightenResult st = straighten_detailed(yk);
  res.steps.push_back({"straighten", "axis=" + std::to_string(st.axis) + " sign=" + detail::fmt(st.sign)});
  JetTuple change = detail::truncate_all(st.change, k);
  JetTuple x = transform_field(st.change, xk);  // order k

  auto apply_linear = [&](const Mat& a, const std::string& name, const std::string& detail_text) {
    const JetTuple id = identity_jet(3, k);
    JetTuple lin(3, Jet(3, k));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (a(i, j) != 0.0) lin[i] += a(i, j) * id[j];
    change = jet_compose(lin, change);
    const int kx = tuple_order(x);
    const Mat ainv = a.inverse();
    const JetTuple idx = identity_jet(3, kx);
    JetTuple pushed(3, Jet(3, kx)), back(3, Jet(3, kx));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (a(i, j) != 0.0) pushed[i] += a(i, j) * x[j];
        if (ainv(i, j) != 0.0) back[i] += ainv(i, j) * idx[j];
      }
    x = jet_compose(pushed, back);
    res.steps.push_back({name, detail_text});
  };

  const double scale = std::max({std::abs(x[0].value()), std::abs(x[1].value()), std::abs(x[2].value())});
  if (std::abs(x[0].value()) <= opts.zero_tol * scale) {
    if (std::abs(x[2].value()) <= opts.zero_tol * scale)
      throw GeometryError("normalize_pair: line fields are not transverse", Vec::Zero(3));
    Mat swap = Mat::Zero(3, 3);
    swap(0, 2) = swap(2, 0) = swap(1, 1) = 1.0;
    apply_linear(swap, "swap_xz", "f1(0)=0");
  }
  if (x[0].value() < 0.0) apply_linear(Mat(Eigen::Vector3d(-1, 1, 1).asDiagonal()), "flip_x", "f1(0)<0");

  {
    const Jet inv = reciprocal(x[0]);
    for (auto& c : x) c = c * inv;
  }
  const double c1 = -x[1].value(), c2 = -x[2].value();
  {
    Mat shift = Mat::Identity(3, 3);
    shift(1, 0) = c1;
    shift(2, 0) = c2;
    apply_linear(shift, "shift", "c1=" + detail::fmt(c1) + " c2=" + detail::fmt(c2));
  }
  // exact zeros after the shift
  x[1].set_coeff(MultiIndex{}, 0.0);
  x[2].set_coeff(MultiIndex{}, 0.0);

  // Step 2: contact twist and the new y = f_3
  const double twist = x[2].gradient(1);
  if (std::abs(twist) <= opts.zero_tol * std::max(1.0, x[2].max_abs()))
    throw GeometryError("normalize_pair: zero contact twist at the origin (not contact)", Vec::Zero(3));
  if (twist < 0.0) apply_linear(Mat(Eigen::Vector3d(1, 1, -1).asDiagonal()), "flip_z", "df3/dy<0");

  const JetTuple id = identity_jet(3, k);
  const Jet f3 = x[2];
  const JetTuple phi2{id[0], f3, id[2]};
  const Jet lx_f3 = lie_derivative(x, f3);  // X(ybar) = L_X f3
  const JetTuple phi2_inv = detail::truncate_all(jet_invert(phi2), k - 1);
  Jet f = jet_compose({lx_f3}, phi2_inv)[0];
  change = jet_compose(phi2, change);
  res.steps.push_back({"ybar=f3", "df3/dy(0)=" + detail::fmt(std::abs(twist))});

  if (opts.zero_constant) {
    const double c = -f.value();
    const JetTuple phi3{id[0], id[1] + c * id[0], id[2] + 0.5 * c * id[0] * id[0]};
    const JetTuple phi3_inv{id[0], id[1] - c * id[0], id[2] - 0.5 * c * id[0] * id[0]};
    f = jet_compose({f}, detail::truncate_all(phi3_inv, k - 1))[0] + c;
    change = jet_compose(phi3, change);
    f.set_coeff(MultiIndex{}, 0.0);
    res.steps.push_back({"zero_f0", "c=" + detail::fmt(c)});
  }

  const JetTuple py = pushforward(change, yk);
  const JetTuple px = pushforward(change, xk);
  res.change = change;
  res.y_scale = reciprocal(py[1]);
  res.x_scale = reciprocal(px[0]);
  res.f = f;
  return res;
}

/// y'' = f(x, y, p), as a scalar field on the (x, y, p) chart.
struct ODE2 {
  ScalarField f;
};

inline const ChartId& ode_chart()
{
  static const ChartId c{"xyp"};
  return c;
}

/// Field given by the Taylor polynomial of a jet expanded at `center`.
inline ScalarField taylor_field(const Jet& j, const ChartId& chart, const Vec& center)
{
  const int n = j.nvars();
  return make_scalar_field(chart, n, [j, center, n](const JetTuple& q) {
    JetTuple d;
    for (int v = 0; v < n; ++v) d.push_back(q[v] - center[v]);
    Jet r(n, q[0].order());
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (j[i] == 0.0) continue;
      Jet term = Jet::constant(n, q[0].order(), j[i]);
      const MultiIndex& e = j.exponent(i);
      for (int v = 0; v < n; ++v)
        if (e[v]) term = term * ipow(d[v], e[v]);
      r += term;
    }
    return r;
  });
}

/// Swap of the last two variables: (x, y, z)_normal <-> (x, p, y)_ode.
inline Jet relabel_normal_ode(const Jet& g)
{
  static constexpr int perm[3] = {0, 2, 1};
  return g.embedded(3, perm);
}

inline JetTuple relabel_normal_ode(const JetTuple& v)
{
  return {relabel_normal_ode(v[0]), relabel_normal_ode(v[2]), relabel_normal_ode(v[1])};
}

/// f in ODE variables (x, y, p), expanded at the origin of the normal-form chart.
inline ODE2 extract_ode(const NormalFormResult& r)
{
  return {taylor_field(relabel_normal_ode(r.f), ode_chart(), Vec::Zero(3))};
}

inline Jet extract_ode_jet(const NormalFormResult& r) { return relabel_normal_ode(r.f); }

/// Largest coefficient error in D(change)(y_scale Y) = d/dy and D(change)(x_scale X) = d/dx + f d/dy + y d/dz.
inline double normal_form_defect(const LegendrianPairJet& pair, const NormalFormResult& r)
{
  const int k = r.f.order();
  auto scaled = [k](const Jet& s, const JetTuple& v) {
    JetTuple out;
    for (const auto& c : v) out.push_back(s.truncated(k) * c.truncated(k));
    return out;
  };
  const JetTuple change = detail::truncate_all(r.change, k);
  const JetTuple py = detail::truncate_all(pushforward(r.change, scaled(r.y_scale, pair.y)), k);
  const JetTuple px = detail::truncate_all(pushforward(r.change, scaled(r.x_scale, pair.x)), k);
  const Jet f_old = jet_compose({r.f}, change)[0];
  const Jet zero(3, k), one = Jet::constant(3, k, 1.0);
  const std::pair<const Jet*, const Jet*> rel[] = {{&py[0], &zero}, {&py[1], &one}, {&py[2], &zero},
                                                   {&px[0], &one},  {&px[1], &f_old}, {&px[2], &change[1]}};
  double d = 0.0;
  for (const auto& [got, want] : rel)
    for (std::size_t i = 0; i < got->size(); ++i) d = std::max(d, std::abs((*got)[i] - (*want)[i]));
  return d;
}

/// V0 = d/dp, V1 = d/dx + p d/dy + f d/dp, annihilated by dy - p dx.
inline ParallelizedContact pair_from_ode(const ODE2& ode)
{
  const ChartId& c = ode_chart();
  const ScalarField f = ode.f;
  const VectorField v0 = coordinate_field(c, 3, 2);
  const VectorField v1(c, 3, 3, f.max_order(), [f](const Vec& q, int order) {
    const JetTuple id = seed(std::span<const double>(q.data(), 3), order);
    return JetTuple{Jet::constant(3, order, 1.0), id[2], f.jets(q, order)[0]};
  });
  const OneForm alpha = make_one_form(c, 3, [](const JetTuple& q) {
    return JetTuple{-q[2], Jet::constant(3, q[0].order(), 1.0), Jet(3, q[0].order())};
  });
  return make_parallelized_contact(v0, v1, alpha);
}

/// Jets at q of a pair given in ODE coordinates, relabelled to normal-form variables.
inline LegendrianPairJet pair_jet_at(const ParallelizedContact& c, const Vec& q, int order)
{
  return {relabel_normal_ode(c.v0.jets(q, order)), relabel_normal_ode(c.v1.jets(q, order))};
}

/**
 * Prolongation of a planar point map (x, y) -> (X, Y) to contact elements:
 * (x, y, p) -> (X, Y, (Y_x + p Y_y) / (X_x + p X_y)), as a jet at (0, 0, p0).
 * Result order is one less than the order of phi.
 */
inline JetTuple prolong_point_map(const JetTuple& phi, double p0 = 0.0)
{
  if (phi.size() != 2 || phi[0].nvars() != 2) throw std::invalid_argument("prolong_point_map: expects a planar map jet");
  const int k = tuple_order(phi) - 1;
  static constexpr int vm[2] = {0, 1};
  const Jet X = phi[0].embedded(3, vm), Y = phi[1].embedded(3, vm);
  const Jet p = Jet::variable(3, k, 2, p0);
  const Jet den = X.derivative(0) + p * X.derivative(1);
  if (std::abs(den.value()) < 1e-12 * std::max(1.0, den.max_abs()))
    throw GeometryError("prolong_point_map: contact element maps to a vertical direction", (Vec(3) << 0, 0, p0).finished());
  return {X.truncated(k), Y.truncated(k), (Y.derivative(0) + p * Y.derivative(1)) / den};
}

}  // namespace engel
