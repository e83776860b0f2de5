// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file jet.hpp
 * @brief Truncated multivariate power series.
 *
 * A Jet in n variables of order k stores the Taylor coefficients of every
 * monomial of total degree <= k. Coefficients are kept densely in graded
 * order (all degree 0, then degree 1, ...), so a jet of order k' < k is a
 * prefix of the same jet at order k. That property lets every binary
 * operation work on the common prefix: the result of combining jets of
 * orders a and b is exact to order min(a, b).
 *
 * The same type serves two purposes: local Taylor expansions of fields at a
 * point (variables are displacements) and the coordinate changes of the
 * normal-form algorithm (variables are coordinates centered at the origin).
 */

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace engel {

inline constexpr int kMaxJetOrder = 6;
inline constexpr int kMaxJetVars = 6;

using MultiIndex = std::array<std::uint8_t, kMaxJetVars>;

namespace detail {

inline std::uint32_t encode(const MultiIndex& m)
{
  std::uint32_t key = 0;
  for (auto e : m) key = key * (kMaxJetOrder + 1) + e;
  return key;
}

/// Monomials of n variables up to kMaxJetOrder in graded order, plus the
/// product table (i, j) -> index of x^i x^j.
struct MonomialTable {
  int nvars = 0;
  std::vector<MultiIndex> exps;
  std::vector<int> degree;
  std::array<int, kMaxJetOrder + 2> count_upto{};  // # monomials of degree < d
  std::unordered_map<std::uint32_t, int> index;
  // products[i] lists (j, i*j) for every j with deg(i)+deg(j) <= kMaxJetOrder,
  // in increasing j (hence increasing degree of j).
  std::vector<std::vector<std::pair<int, int>>> products;
  // shift[v][i] = index of x^i * x_v or -1 when the degree would exceed the cap
  std::vector<std::vector<int>> shift_up;
  // shift_down[v][i] = index of x^i / x_v or -1 when exponent of v is zero
  std::vector<std::vector<int>> shift_down;

  explicit MonomialTable(int n) : nvars(n)
  {
    // graded enumeration: recursive fill by degree
    for (int d = 0; d <= kMaxJetOrder; ++d) {
      count_upto[d] = static_cast<int>(exps.size());
      MultiIndex m{};
      enumerate(m, 0, d);
    }
    count_upto[kMaxJetOrder + 1] = static_cast<int>(exps.size());
    for (int i = 0; i < static_cast<int>(exps.size()); ++i) index.emplace(encode(exps[i]), i);

    const int size = static_cast<int>(exps.size());
    products.resize(size);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        if (degree[i] + degree[j] > kMaxJetOrder) break;
        MultiIndex s{};
        for (int v = 0; v < kMaxJetVars; ++v) s[v] = exps[i][v] + exps[j][v];
        products[i].emplace_back(j, index.at(encode(s)));
      }
    }
    shift_up.assign(n, std::vector<int>(size, -1));
    shift_down.assign(n, std::vector<int>(size, -1));
    for (int v = 0; v < n; ++v) {
      for (int i = 0; i < size; ++i) {
        MultiIndex m = exps[i];
        if (degree[i] < kMaxJetOrder) {
          m[v] += 1;
          shift_up[v][i] = index.at(encode(m));
          m[v] -= 1;
        }
        if (m[v] > 0) {
          m[v] -= 1;
          shift_down[v][i] = index.at(encode(m));
        }
      }
    }
  }

  int size(int order) const { return count_upto[order + 1]; }

 private:
  void enumerate(MultiIndex& m, int var, int remaining)
  {
    if (var == nvars - 1 || nvars == 0) {
      if (nvars == 0) {
        if (remaining == 0) {
          exps.push_back(m);
          degree.push_back(0);
        }
        return;
      }
      m[var] = static_cast<std::uint8_t>(remaining);
      int total = 0;
      for (int v = 0; v < nvars; ++v) total += m[v];
      exps.push_back(m);
      degree.push_back(total);
      m[var] = 0;
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      m[var] = static_cast<std::uint8_t>(e);
      enumerate(m, var + 1, remaining - e);
    }
    m[var] = 0;
  }
};

inline const MonomialTable& table(int nvars)
{
  static const std::array<MonomialTable, kMaxJetVars + 1> tables = [] {
    return std::array<MonomialTable, kMaxJetVars + 1>{
      MonomialTable(0), MonomialTable(1), MonomialTable(2), MonomialTable(3),
      MonomialTable(4), MonomialTable(5), MonomialTable(6)};
  }();
  return tables[nvars];
}

}  // namespace detail

class Jet {
 public:
  Jet() = default;

  Jet(int nvars, int order) : nvars_(nvars), order_(order)
  {
    if (nvars < 0 || nvars > kMaxJetVars) throw std::invalid_argument("Jet: unsupported variable count");
    if (order < 0 || order > kMaxJetOrder) throw std::invalid_argument("Jet: order outside [0, 6]");
    c_.assign(detail::table(nvars).size(order), 0.0);
  }

  static Jet constant(int nvars, int order, double value)
  {
    Jet j(nvars, order);
    j.c_[0] = value;
    return j;
  }

  /// x_var = value + eps_var
  static Jet variable(int nvars, int order, int var, double value = 0.0)
  {
    Jet j = constant(nvars, order, value);
    if (order >= 1) j.c_[1 + var] = 1.0;
    return j;
  }

  int nvars() const { return nvars_; }
  int order() const { return order_; }
  std::size_t size() const { return c_.size(); }
  double value() const { return c_[0]; }

  double& operator[](std::size_t i) { return c_[i]; }
  double operator[](std::size_t i) const { return c_[i]; }
  std::span<const double> coefficients() const { return c_; }

  const MultiIndex& exponent(std::size_t i) const { return detail::table(nvars_).exps[i]; }
  int degree_of(std::size_t i) const { return detail::table(nvars_).degree[i]; }

  double coeff(const MultiIndex& m) const
  {
    const auto& t = detail::table(nvars_);
    auto it = t.index.find(detail::encode(m));
    if (it == t.index.end() || it->second >= static_cast<int>(c_.size())) return 0.0;
    return c_[it->second];
  }

  void set_coeff(const MultiIndex& m, double v)
  {
    const auto& t = detail::table(nvars_);
    auto it = t.index.find(detail::encode(m));
    if (it == t.index.end() || it->second >= static_cast<int>(c_.size()))
      throw std::out_of_range("Jet: multi-index beyond jet order");
    c_[it->second] = v;
  }

  /// Partial derivative in value: first-order coefficient of variable v.
  double gradient(int v) const { return order_ >= 1 ? c_[1 + v] : 0.0; }

  Jet truncated(int order) const
  {
    if (order > order_) throw std::invalid_argument("Jet: cannot raise order by truncation");
    Jet r(nvars_, order);
    std::copy_n(c_.begin(), r.c_.size(), r.c_.begin());
    return r;
  }

  /// d/dx_v; the result is exact to one order less.
  Jet derivative(int v) const
  {
    if (order_ == 0) throw std::domain_error("Jet: derivative requested beyond available order");
    const auto& t = detail::table(nvars_);
    Jet r(nvars_, order_ - 1);
    for (std::size_t i = 0; i < c_.size(); ++i) {
      const int dn = t.shift_down[v][i];
      if (dn >= 0 && dn < static_cast<int>(r.c_.size())) r.c_[dn] += c_[i] * t.exps[i][v];
    }
    return r;
  }

  /// Antiderivative in x_v vanishing on {x_v = 0}; exact to one order more.
  Jet integral(int v) const
  {
    if (order_ >= kMaxJetOrder) throw std::domain_error("Jet: integral would exceed maximum order");
    const auto& t = detail::table(nvars_);
    Jet r(nvars_, order_ + 1);
    for (std::size_t i = 0; i < c_.size(); ++i) {
      const int up = t.shift_up[v][i];
      r.c_[up] += c_[i] / (t.exps[i][v] + 1);
    }
    return r;
  }

  /// Re-index into a jet of `nvars` variables; old variable i becomes var_map[i].
  Jet embedded(int nvars, std::span<const int> var_map) const
  {
    Jet r(nvars, order_);
    const auto& to = detail::table(nvars);
    for (std::size_t i = 0; i < c_.size(); ++i) {
      if (c_[i] == 0.0) continue;
      MultiIndex m{};
      const auto& e = exponent(i);
      for (int v = 0; v < nvars_; ++v) m[var_map[v]] += e[v];
      r.c_[to.index.at(detail::encode(m))] += c_[i];
    }
    return r;
  }

  /// Restriction to {x_v = 0}, dropping variable v.
  Jet restricted(int v) const
  {
    Jet r(nvars_ - 1, order_);
    const auto& to = detail::table(nvars_ - 1);
    for (std::size_t i = 0; i < c_.size(); ++i) {
      const auto& e = exponent(i);
      if (e[v] != 0) continue;
      MultiIndex m{};
      for (int u = 0, w = 0; u < nvars_; ++u)
        if (u != v) m[w++] = e[u];
      r.c_[to.index.at(detail::encode(m))] = c_[i];
    }
    return r;
  }

  /// Polynomial value at a displacement.
  double evaluate(std::span<const double> dx) const
  {
    double sum = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) {
      if (c_[i] == 0.0) continue;
      double term = c_[i];
      const auto& e = exponent(i);
      for (int v = 0; v < nvars_; ++v)
        for (int p = 0; p < e[v]; ++p) term *= dx[v];
      sum += term;
    }
    return sum;
  }

  double max_abs() const
  {
    double m = 0.0;
    for (double x : c_) m = std::max(m, std::abs(x));
    return m;
  }

  Jet& operator+=(const Jet& o) { return combine(o, 1.0); }
  Jet& operator-=(const Jet& o) { return combine(o, -1.0); }
  Jet& operator+=(double s)
  {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s)
  {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(double s)
  {
    for (auto& x : c_) x *= s;
    return *this;
  }
  Jet& operator/=(double s)
  {
    for (auto& x : c_) x /= s;
    return *this;
  }

  friend Jet operator*(const Jet& a, const Jet& b)
  {
    check_compatible(a, b);
    const int order = std::min(a.order_, b.order_);
    Jet r(a.nvars_, order);
    const auto& t = detail::table(a.nvars_);
    const int n = static_cast<int>(r.c_.size());
    for (int i = 0; i < n; ++i) {
      const double ai = a.c_[i];
      if (ai == 0.0) continue;
      const int jmax = t.size(order - t.degree[i]);
      for (const auto& [j, k] : t.products[i]) {
        if (j >= jmax) break;
        r.c_[k] += ai * b.c_[j];
      }
    }
    return r;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, const Jet& a) { return -a + s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a /= s; }
  friend Jet operator-(Jet a)
  {
    for (auto& x : a.c_) x = -x;
    return a;
  }

 private:
  static void check_compatible(const Jet& a, const Jet& b)
  {
    if (a.nvars_ != b.nvars_) throw std::invalid_argument("Jet: variable count mismatch");
  }

  Jet& combine(const Jet& o, double sign)
  {
    check_compatible(*this, o);
    if (o.order_ < order_) {
      order_ = o.order_;
      c_.resize(o.c_.size());
    }
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += sign * o.c_[i];
    return *this;
  }

  int nvars_ = 0;
  int order_ = 0;
  std::vector<double> c_{0.0};
};

using JetTuple = std::vector<Jet>;

/// f(a + d) = sum_m taylor[m] d^m for d = a - a(0); taylor has order+1 entries.
inline Jet apply_series(const Jet& a, std::span<const double> taylor)
{
  Jet delta = a;
  delta[0] = 0.0;
  Jet result = Jet::constant(a.nvars(), a.order(), taylor[0]);
  Jet power = delta;
  for (int m = 1; m <= a.order(); ++m) {
    if (taylor[m] != 0.0) result += taylor[m] * power;
    if (m < a.order()) power = power * delta;
  }
  return result;
}

inline Jet sin(const Jet& a)
{
  std::array<double, kMaxJetOrder + 1> t{};
  const double s = std::sin(a.value()), c = std::cos(a.value());
  double fact = 1.0;
  for (int m = 0; m <= a.order(); ++m) {
    if (m > 0) fact *= m;
    const double d[4] = {s, c, -s, -c};
    t[m] = d[m % 4] / fact;
  }
  return apply_series(a, t);
}

inline Jet cos(const Jet& a)
{
  std::array<double, kMaxJetOrder + 1> t{};
  const double s = std::sin(a.value()), c = std::cos(a.value());
  double fact = 1.0;
  for (int m = 0; m <= a.order(); ++m) {
    if (m > 0) fact *= m;
    const double d[4] = {c, -s, -c, s};
    t[m] = d[m % 4] / fact;
  }
  return apply_series(a, t);
}

inline Jet exp(const Jet& a)
{
  std::array<double, kMaxJetOrder + 1> t{};
  const double e = std::exp(a.value());
  double fact = 1.0;
  for (int m = 0; m <= a.order(); ++m) {
    if (m > 0) fact *= m;
    t[m] = e / fact;
  }
  return apply_series(a, t);
}

/// (a0 + d)^p for real p, a0 > 0 unless p is a non-negative integer.
inline Jet pow(const Jet& a, double p)
{
  std::array<double, kMaxJetOrder + 1> t{};
  const double a0 = a.value();
  double binom = 1.0;
  for (int m = 0; m <= a.order(); ++m) {
    if (m > 0) binom *= (p - (m - 1)) / m;
    t[m] = binom * std::pow(a0, p - m);
  }
  return apply_series(a, t);
}

inline Jet reciprocal(const Jet& a)
{
  if (a.value() == 0.0) throw std::domain_error("Jet: reciprocal of a jet with zero constant term");
  std::array<double, kMaxJetOrder + 1> t{};
  const double inv = 1.0 / a.value();
  double term = inv;
  for (int m = 0; m <= a.order(); ++m) {
    t[m] = term;
    term *= -inv;
  }
  return apply_series(a, t);
}

inline Jet sqrt(const Jet& a)
{
  if (a.value() <= 0.0) throw std::domain_error("Jet: sqrt of a non-positive jet");
  return pow(a, 0.5);
}

inline Jet log(const Jet& a)
{
  if (a.value() <= 0.0) throw std::domain_error("Jet: log of a non-positive jet");
  std::array<double, kMaxJetOrder + 1> t{};
  t[0] = std::log(a.value());
  double inv = 1.0 / a.value(), term = inv;
  for (int m = 1; m <= a.order(); ++m) {
    t[m] = ((m % 2) ? 1.0 : -1.0) * term / m;
    term *= inv;
  }
  return apply_series(a, t);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(double s, const Jet& b) { return s * reciprocal(b); }

inline Jet ipow(const Jet& a, int e)
{
  Jet r = Jet::constant(a.nvars(), a.order(), 1.0);
  for (int i = 0; i < e; ++i) r = r * a;
  return r;
}

/// Jets of the coordinate functions x_i = point_i + eps_i.
inline JetTuple seed(std::span<const double> point, int order)
{
  const int n = static_cast<int>(point.size());
  JetTuple x;
  x.reserve(n);
  for (int i = 0; i < n; ++i) x.push_back(Jet::variable(n, order, i, point[i]));
  return x;
}

inline JetTuple identity_jet(int nvars, int order)
{
  std::vector<double> zero(nvars, 0.0);
  return seed(zero, order);
}

inline int tuple_order(const JetTuple& t)
{
  int k = kMaxJetOrder;
  for (const auto& j : t) k = std::min(k, j.order());
  return k;
}

inline Eigen::MatrixXd linear_part(const JetTuple& map)
{
  const int m = static_cast<int>(map.size());
  const int n = m ? map[0].nvars() : 0;
  Eigen::MatrixXd a(m, n);
  for (int i = 0; i < m; ++i)
    for (int v = 0; v < n; ++v) a(i, v) = map[i].gradient(v);
  return a;
}

/**
 * Composition outer(inner(x)). `outer` is a tuple of jets in m variables,
 * `inner` a tuple of m jets in n variables without constant terms. The
 * result is exact to min(order(outer), order(inner)).
 */
inline JetTuple jet_compose(const JetTuple& outer, const JetTuple& inner)
{
  if (outer.empty()) return {};
  const int m = outer[0].nvars();
  if (static_cast<int>(inner.size()) != m) throw std::invalid_argument("jet_compose: dimension mismatch");
  for (const auto& o : outer)
    if (o.nvars() != m) throw std::invalid_argument("jet_compose: dimension mismatch");
  const int n = inner.empty() ? 0 : inner[0].nvars();
  for (const auto& j : inner) {
    if (j.nvars() != n) throw std::invalid_argument("jet_compose: dimension mismatch");
    if (j.value() != 0.0) throw std::invalid_argument("jet_compose: inner map must fix the origin");
  }
  const int order = std::min(tuple_order(outer), tuple_order(inner));
  const auto& t = detail::table(m);
  const int count = t.size(order);

  // powers[i] = inner^{exps[i]}, built by multiplying a lower monomial by one inner component
  std::vector<Jet> powers;
  powers.reserve(count);
  powers.push_back(Jet::constant(n, order, 1.0));
  for (int i = 1; i < count; ++i) {
    const auto& e = t.exps[i];
    int v = 0;
    while (e[v] == 0) ++v;
    MultiIndex lower = e;
    lower[v] -= 1;
    const int li = t.index.at(detail::encode(lower));
    powers.push_back(powers[li] * inner[v].truncated(order));
  }
  JetTuple result;
  result.reserve(outer.size());
  for (const auto& o : outer) {
    Jet r(n, order);
    for (int i = 0; i < count; ++i)
      if (o[i] != 0.0) r += o[i] * powers[i];
    result.push_back(std::move(r));
  }
  return result;
}

/// Compositional inverse of an origin-fixing map with invertible linear part.
inline JetTuple jet_invert(const JetTuple& change)
{
  const int n = static_cast<int>(change.size());
  if (n == 0) return {};
  if (change[0].nvars() != n) throw std::invalid_argument("jet_invert: map must be square");
  for (const auto& c : change)
    if (c.value() != 0.0) throw std::invalid_argument("jet_invert: map must fix the origin");
  const Eigen::MatrixXd a = linear_part(change);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-14 * std::max(1.0, a.norm()))
    throw std::domain_error("jet_invert: singular linear part");
  const Eigen::MatrixXd ainv = lu.inverse();
  const int order = tuple_order(change);

  // nonlinear remainder N = change - A x
  JetTuple nonlinear;
  for (int i = 0; i < n; ++i) {
    Jet r = change[i].truncated(order);
    for (int v = 0; v < n && order >= 1; ++v) r[1 + v] = 0.0;
    nonlinear.push_back(std::move(r));
  }
  const JetTuple y = identity_jet(n, order);
  // inverse = A^{-1}(y - N(inverse)); each pass fixes one more degree
  JetTuple inv(n, Jet(n, order));
  for (int i = 0; i < n; ++i)
    for (int v = 0; v < n; ++v) inv[i] += ainv(i, v) * y[v];
  for (int pass = 1; pass < order; ++pass) {
    const JetTuple n_of_inv = jet_compose(nonlinear, inv);
    JetTuple next(n, Jet(n, order));
    for (int i = 0; i < n; ++i)
      for (int v = 0; v < n; ++v) next[i] += ainv(i, v) * (y[v] - n_of_inv[v]);
    inv = std::move(next);
  }
  return inv;
}

}  // namespace engel
