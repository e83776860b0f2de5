// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file integrator.hpp
 * @brief Classical RK4 with step-doubling error control and slice events.
 *
 * Each accepted step compares one step of size h with two of size h/2; the
 * difference / 15 estimates the local error of the half-step result, which
 * is then Richardson-extrapolated. Events are sign changes of a scalar
 * constraint; the crossing is refined by bisection on re-integrated
 * sub-steps until the constraint value is below the event tolerance.
 */

#include "engel/core/field.hpp"
#include "engel/core/point.hpp"

#include <cmath>
#include <functional>
#include <optional>

namespace engel {

using OdeRhs = std::function<Vec(double t, const Vec& y)>;

struct IntegratorOptions {
  double tol = 1e-9;
  double initial_step = 1e-2;
  double max_step = 0.25;
  long max_steps = 2'000'000;
  /// Bounds applied to the leading components of the state (the chart point).
  std::optional<Box> bounds;
};

/// Constraint g(t, y) = 0. With a period P > 0 the constraint is read modulo P
/// and wrap-around jumps of g are not reported as crossings.
struct EventSpec {
  std::function<double(double t, const Vec& y)> g;
  double period = 0.0;
  double tol = 1e-10;
};

struct IntegrationResult {
  double t = 0.0;
  Vec y;
  long steps = 0;
  double est_error = 0.0;
  bool event_hit = false;
};

struct FlowResult {
  Point endpoint;
  double time = 0.0;
  long step_count = 0;
  double est_error = 0.0;
};

namespace detail {

inline Vec rk4_step(const OdeRhs& f, double t, const Vec& y, double h)
{
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  const Vec k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  const Vec k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Step-doubled RK4 step; returns the extrapolated state and the error estimate.
inline std::pair<Vec, double> doubled_step(const OdeRhs& f, double t, const Vec& y, double h)
{
  const Vec full = rk4_step(f, t, y, h);
  const Vec half = rk4_step(f, t + 0.5 * h, rk4_step(f, t, y, 0.5 * h), 0.5 * h);
  const Vec diff = (half - full) / 15.0;
  return {half + diff, diff.lpNorm<Eigen::Infinity>()};
}

inline double wrapped(double g, double period)
{
  return period > 0.0 ? std::remainder(g, period) : g;
}

inline bool in_bounds(const IntegratorOptions& opts, const Vec& y)
{
  if (!opts.bounds) return true;
  return opts.bounds->contains(y.head(opts.bounds->lower.size()));
}

}  // namespace detail

/**
 * Integrate y' = f(t, y) from t0 toward t1 (either direction). With an event,
 * integration stops at the first crossing after the start point.
 */
inline IntegrationResult integrate(const OdeRhs& f, double t0, const Vec& y0, double t1,
                                   const IntegratorOptions& opts = {}, const EventSpec* event = nullptr)
{
  IntegrationResult res;
  res.t = t0;
  res.y = y0;
  if (!(opts.tol > 0.0)) throw std::invalid_argument("integrate: tol must be positive");
  if (!detail::in_bounds(opts, y0)) throw GeometryError("integrate: start point outside chart bounds", y0);
  const double span = t1 - t0;
  if (span == 0.0) return res;
  const double dir = span > 0.0 ? 1.0 : -1.0;
  double h = dir * std::min(std::abs(opts.initial_step), std::abs(span));
  double g_prev = event ? detail::wrapped(event->g(t0, y0), event->period) : 0.0;

  while (dir * (t1 - res.t) > 0.0) {
    if (res.steps >= opts.max_steps) throw GeometryError("integrate: step budget exhausted", res.y);
    if (dir * (res.t + h - t1) > 0.0) h = t1 - res.t;
    const double scale = opts.tol * std::max(1.0, res.y.lpNorm<Eigen::Infinity>());
    auto [next, err] = detail::doubled_step(f, res.t, res.y, h);
    if (!next.allFinite()) err = std::numeric_limits<double>::infinity();
    if (err > scale) {
      const double factor = std::isfinite(err) ? std::max(0.1, 0.9 * std::pow(scale / err, 0.2)) : 0.1;
      h *= factor;
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(res.t)))
        throw GeometryError("integrate: step size underflow", res.y);
      continue;
    }
    const double t_next = (res.t + h == t1 || dir * (res.t + h - t1) >= 0.0) ? t1 : res.t + h;
    if (!detail::in_bounds(opts, next)) throw GeometryError("integrate: trajectory left the chart bounds", next);

    if (event) {
      const double g_next = detail::wrapped(event->g(t_next, next), event->period);
      const bool jump = event->period > 0.0 && std::abs(g_next - g_prev) > 0.5 * event->period;
      const bool crossed = g_prev != 0.0 && !jump && ((g_prev < 0.0 && g_next >= 0.0) || (g_prev > 0.0 && g_next <= 0.0));
      if (crossed) {
        // bisection on the sub-step length from the accepted step's start
        double lo = 0.0, hi = h;
        double g_lo = g_prev;
        Vec y_mid = next;
        double t_mid = t_next;
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          y_mid = detail::doubled_step(f, res.t, res.y, mid).first;
          t_mid = res.t + mid;
          const double g_mid = detail::wrapped(event->g(t_mid, y_mid), event->period);
          if (std::abs(g_mid) < event->tol) break;
          if ((g_mid < 0.0) == (g_lo < 0.0)) {
            lo = mid;
            g_lo = g_mid;
          } else {
            hi = mid;
          }
          if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(res.t))) break;
        }
        res.y = y_mid;
        res.t = t_mid;
        res.est_error += err;
        ++res.steps;
        res.event_hit = true;
        return res;
      }
      g_prev = g_next;
    }

    res.y = std::move(next);
    res.t = t_next;
    res.est_error += err;
    ++res.steps;
    const double grow = err > 0.0 ? std::min(2.0, 0.9 * std::pow(scale / err, 0.2)) : 2.0;
    h = dir * std::min(std::abs(h) * std::max(grow, 0.2), opts.max_step);
  }
  return res;
}

/// Time-t integral curve of X through p.
inline FlowResult flow(const VectorField& x, const Point& p, double t, double tol = 1e-9,
                       std::optional<Box> bounds = std::nullopt)
{
  if (!(p.chart == x.chart())) throw std::invalid_argument("flow: chart mismatch");
  IntegratorOptions opts;
  opts.tol = tol;
  opts.bounds = std::move(bounds);
  const OdeRhs rhs = [&x](double, const Vec& y) { return x.value(y); };
  const IntegrationResult r = integrate(rhs, 0.0, p.coords, t, opts);
  return {Point(p.chart, r.y), r.t, r.steps, r.est_error};
}

/// State layout [q, v_1, ..., v_m] for the flow together with its variational equation.
inline OdeRhs variational_rhs(const VectorField& x, int tangents)
{
  return [x, tangents](double, const Vec& y) {
    const int n = x.dim();
    const JetTuple j = x.jets(Vec(y.head(n)), 1);
    Vec dy(y.size());
    for (int i = 0; i < n; ++i) dy[i] = j[i].value();
    const Mat a = linear_part(j);
    for (int k = 0; k < tangents; ++k) dy.segment(n * (k + 1), n) = a * y.segment(n * (k + 1), n);
    return dy;
  };
}

}  // namespace engel
