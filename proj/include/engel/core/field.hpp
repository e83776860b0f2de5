// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file field.hpp
 * @brief Smooth fields on a single chart, evaluated as local Taylor jets.
 *
 * A field is a rule (point, order k) -> tuple of jets in the chart
 * displacement variables. Fields defined by formulas are written once over
 * Jet arithmetic and seeded with x_i = p_i + eps_i; derived fields (brackets,
 * combinations, embeddings) are built from other fields' jets. A derived
 * field records the highest order it can deliver, which is how a bracket of
 * fields evaluable to order k ends up evaluable to order k - 1.
 */

#include "engel/core/jet.hpp"
#include "engel/core/point.hpp"

#include <functional>
#include <memory>
#include <type_traits>
#include <utility>

namespace engel {

struct VectorKind {};
struct CovectorKind {};
struct ScalarKind {};

template <class Kind>
class Field {
 public:
  using Rule = std::function<JetTuple(const Vec& p, int order)>;

  Field() = default;
  Field(ChartId chart, int dim, int components, int max_order, Rule rule)
      : chart_(std::move(chart)),
        dim_(dim),
        components_(components),
        max_order_(max_order),
        rule_(std::make_shared<const Rule>(std::move(rule)))
  {
  }

  const ChartId& chart() const { return chart_; }
  int dim() const { return dim_; }
  int components() const { return components_; }
  int max_order() const { return max_order_; }

  JetTuple jets(const Vec& p, int order) const
  {
    if (order > max_order_) throw std::domain_error("Field: requested derivative order exceeds available order");
    if (p.size() != dim_) throw std::invalid_argument("Field: point dimension mismatch");
    return (*rule_)(p, order);
  }

  JetTuple jets(const Point& p, int order) const
  {
    if (!(p.chart == chart_)) throw std::invalid_argument("Field: chart mismatch (" + p.chart.name + " vs " + chart_.name + ")");
    return jets(p.coords, order);
  }

  Vec value(const Vec& p) const
  {
    const JetTuple j = jets(p, 0);
    Vec v(components_);
    for (int i = 0; i < components_; ++i) v[i] = j[i].value();
    return v;
  }

  /// components x dim matrix of first partials.
  Mat jacobian(const Vec& p) const { return linear_part(jets(p, 1)); }

 private:
  ChartId chart_;
  int dim_ = 0;
  int components_ = 0;
  int max_order_ = 0;
  std::shared_ptr<const Rule> rule_;
};

using VectorField = Field<VectorKind>;
using OneForm = Field<CovectorKind>;
using ScalarField = Field<ScalarKind>;

/// Field given by a formula over coordinate jets; evaluable to the jet order cap.
template <class Kind, class Fn>
Field<Kind> make_field(ChartId chart, int dim, int components, Fn&& formula)
{
  return Field<Kind>(std::move(chart), dim, components, kMaxJetOrder,
                     [f = std::forward<Fn>(formula)](const Vec& p, int order) {
                       return JetTuple(f(seed(std::span<const double>(p.data(), p.size()), order)));
                     });
}

template <class Fn>
VectorField make_vector_field(ChartId chart, int dim, Fn&& formula)
{
  return make_field<VectorKind>(std::move(chart), dim, dim, std::forward<Fn>(formula));
}

template <class Fn>
OneForm make_one_form(ChartId chart, int dim, Fn&& formula)
{
  return make_field<CovectorKind>(std::move(chart), dim, dim, std::forward<Fn>(formula));
}

template <class Fn>
ScalarField make_scalar_field(ChartId chart, int dim, Fn&& formula)
{
  return make_field<ScalarKind>(std::move(chart), dim, 1,
                                [f = std::forward<Fn>(formula)](const JetTuple& x) { return JetTuple{f(x)}; });
}

/// Constant-coefficient vector field.
inline VectorField constant_field(ChartId chart, const Vec& components)
{
  const int n = static_cast<int>(components.size());
  return make_vector_field(std::move(chart), n, [components, n](const JetTuple& x) {
    JetTuple r;
    for (int i = 0; i < n; ++i) r.push_back(Jet::constant(n, x[0].order(), components[i]));
    return r;
  });
}

inline VectorField coordinate_field(ChartId chart, int dim, int axis)
{
  return constant_field(std::move(chart), Vec::Unit(dim, axis));
}

namespace detail {

template <class A, class B>
void require_same_chart(const Field<A>& a, const Field<B>& b)
{
  if (!(a.chart() == b.chart())) throw std::invalid_argument("chart mismatch: " + a.chart().name + " vs " + b.chart().name);
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch between fields");
}

}  // namespace detail

/// Directional derivative X(f) for each component f of `target`, as jets of order k.
inline JetTuple directional_derivative(const JetTuple& along, const JetTuple& target, int order)
{
  const int n = static_cast<int>(along.size());
  JetTuple r;
  r.reserve(target.size());
  for (const auto& f : target) {
    Jet acc(f.nvars(), order);
    for (int j = 0; j < n; ++j) acc += along[j].truncated(order) * f.derivative(j);
    r.push_back(std::move(acc));
  }
  return r;
}

/// [X, Y] = DY.X - DX.Y; evaluable to one order less than its inputs.
inline VectorField lie_bracket(const VectorField& x, const VectorField& y)
{
  detail::require_same_chart(x, y);
  const int max_order = std::min(x.max_order(), y.max_order()) - 1;
  if (max_order < 0) throw std::domain_error("lie_bracket: inputs must be evaluable to order >= 1");
  return VectorField(x.chart(), x.dim(), x.dim(), max_order, [x, y](const Vec& p, int order) {
    const JetTuple jx = x.jets(p, order + 1);
    const JetTuple jy = y.jets(p, order + 1);
    JetTuple a = directional_derivative(jx, jy, order);
    const JetTuple b = directional_derivative(jy, jx, order);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
  });
}

template <class Kind>
Field<Kind> operator+(const Field<Kind>& a, const Field<Kind>& b)
{
  detail::require_same_chart(a, b);
  return Field<Kind>(a.chart(), a.dim(), a.components(), std::min(a.max_order(), b.max_order()),
                     [a, b](const Vec& p, int order) {
                       JetTuple r = a.jets(p, order);
                       const JetTuple s = b.jets(p, order);
                       for (std::size_t i = 0; i < r.size(); ++i) r[i] += s[i];
                       return r;
                     });
}

template <class Kind>
Field<Kind> operator*(double s, const Field<Kind>& a)
{
  return Field<Kind>(a.chart(), a.dim(), a.components(), a.max_order(), [a, s](const Vec& p, int order) {
    JetTuple r = a.jets(p, order);
    for (auto& j : r) j *= s;
    return r;
  });
}

template <class Kind>
Field<Kind> operator-(const Field<Kind>& a, const Field<Kind>& b)
{
  return a + (-1.0) * b;
}

/// f * X for a scalar field f.
template <class Kind>
Field<Kind> operator*(const ScalarField& f, const Field<Kind>& a)
{
  detail::require_same_chart(f, a);
  return Field<Kind>(a.chart(), a.dim(), a.components(), std::min(a.max_order(), f.max_order()),
                     [a, f](const Vec& p, int order) {
                       JetTuple r = a.jets(p, order);
                       const Jet s = f.jets(p, order)[0];
                       for (auto& j : r) j = s * j;
                       return r;
                     });
}

/// alpha(X) as a scalar field.
inline ScalarField contract(const OneForm& alpha, const VectorField& x)
{
  detail::require_same_chart(alpha, x);
  return ScalarField(x.chart(), x.dim(), 1, std::min(alpha.max_order(), x.max_order()),
                     [alpha, x](const Vec& p, int order) {
                       const JetTuple a = alpha.jets(p, order);
                       const JetTuple v = x.jets(p, order);
                       Jet s(p.size(), order);
                       for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * v[i];
                       return JetTuple{s};
                     });
}

/// Pull a field on an n-chart into an N-chart by placing old variable i at var_map[i].
/// Vector and covector components land in the same slots; the rest are zero.
template <class Kind>
Field<Kind> embed(const Field<Kind>& f, ChartId chart, int dim, std::vector<int> var_map)
{
  const int comps = std::is_same_v<Kind, ScalarKind> ? 1 : dim;
  return Field<Kind>(std::move(chart), dim, comps, f.max_order(), [f, dim, var_map](const Vec& p, int order) {
    Vec sub(f.dim());
    for (int i = 0; i < f.dim(); ++i) sub[i] = p[var_map[i]];
    const JetTuple inner = f.jets(sub, order);
    if constexpr (std::is_same_v<Kind, ScalarKind>) {
      return JetTuple{inner[0].embedded(dim, var_map)};
    } else {
      JetTuple r(dim, Jet(dim, order));
      for (int i = 0; i < f.dim(); ++i) r[var_map[i]] = inner[i].embedded(dim, var_map);
      return r;
    }
  });
}

/// Exterior derivative of a one-form at p: (d alpha)_{ij} = d_i alpha_j - d_j alpha_i.
inline Mat exterior_derivative(const OneForm& alpha, const Vec& p)
{
  const Mat j = alpha.jacobian(p);  // j(i, v) = d_v alpha_i
  return j.transpose() - j;
}

/// Same, as jets of order k (needs alpha to order k + 1).
inline std::vector<JetTuple> exterior_derivative_jets(const JetTuple& alpha, int order)
{
  const int n = static_cast<int>(alpha.size());
  std::vector<JetTuple> d(n, JetTuple(n, Jet(alpha[0].nvars(), order)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) d[i][j] = alpha[j].derivative(i) - alpha[i].derivative(j);
  return d;
}

/// Euclidean cross product of jet 3-vectors.
inline JetTuple cross(const JetTuple& a, const JetTuple& b)
{
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Jet dot(const JetTuple& a, const JetTuple& b)
{
  Jet s = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace engel
