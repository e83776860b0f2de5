// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one line per criterion, exit status 0 only if all pass.

#include <boost/numeric/odeint.hpp>

#include "engel/engel.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace engel;
using engel::oracle::uniform_point;

namespace {

constexpr double kPi = std::numbers::pi;
const ChartId kM{"M"};

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const char* what, double value, const char* op, double bound)
  {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s=%.3g (%s %.3g%s)", detail.empty() ? "" : "; ", what, value, op, bound, ok ? "" : " violated");
    detail += buf;
    pass = pass && ok;
  }
  void below(const char* what, double value, double bound) { require(value < bound, what, value, "<", bound); }
  void at_most(const char* what, double value, double bound) { require(value <= bound, what, value, "<=", bound); }
  void info(const char* what, double value)
  {
    char buf[120];
    std::snprintf(buf, sizeof buf, "%s%s=%.3g (info)", detail.empty() ? "" : "; ", what, value);
    detail += buf;
  }
  void at_least(const char* what, double value, double bound) { require(value >= bound, what, value, ">=", bound); }
};

Vec with_theta(const Vec& m, double theta)
{
  Vec q(4);
  q << m, theta;
  return q;
}

// V0 = d/dx + y d/dz + e d/dy, V1 = d/dy + f d/dz with random quadratic e, f
ParallelizedContact perturbed_contact(std::mt19937_64& rng, double amplitude)
{
  const oracle::Polynomial e = oracle::random_polynomial(rng, 3, 2, amplitude);
  const oracle::Polynomial f = oracle::random_polynomial(rng, 3, 2, amplitude);
  const VectorField v0 = make_vector_field(kM, 3, [e](const JetTuple& q) {
    return JetTuple{Jet::constant(3, q[0].order(), 1.0), oracle::eval_poly(e, q), q[1]};
  });
  const VectorField v1 = make_vector_field(kM, 3, [f](const JetTuple& q) {
    const int k = q[0].order();
    return JetTuple{Jet(3, k), Jet::constant(3, k, 1.0), oracle::eval_poly(f, q)};
  });
  return make_parallelized_contact(v0, v1);
}

// redraws until the frame is contact at every probe point
ParallelizedContact contact_passing_check(std::mt19937_64& rng, double amplitude, int probes = 200)
{
  for (;;) {
    const ParallelizedContact c = perturbed_contact(rng, amplitude);
    bool ok = true;
    for (int i = 0; i < probes && ok; ++i) ok = is_contact(c.frame(), Point(kM, uniform_point(rng, 3)));
    if (ok) return c;
  }
}

Outcome engel_normal_form()
{
  const ChartId chart{"R4"};
  const VectorField w = coordinate_field(chart, 4, 3);
  const VectorField x = make_vector_field(chart, 4, [](const JetTuple& q) {
    const int k = q[0].order();
    return JetTuple{Jet::constant(4, k, 1.0), q[3], q[1], Jet(4, k)};
  });
  const DistributionFrame d({w, x});
  std::mt19937_64 rng(101);
  long bad = 0;
  double angle = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Point p(chart, uniform_point(rng, 4));
    const FlagReport r = flag_ranks(d, p);
    if (r.ranks != std::array<int, 3>{2, 3, 4}) {
      ++bad;
      continue;
    }
    angle = std::max(angle, line_angle(characteristic_line(d, p).direction, Vec::Unit(4, 3)));
  }
  Outcome o;
  o.at_most("non-(2,3,4) points", static_cast<double>(bad), 0.0);
  o.below("characteristic angle", angle, 1e-8);
  return o;
}

Outcome prolongation()
{
  std::mt19937_64 rng(202);
  long non_engel = 0;
  double plane_angle = 0.0;
  for (int s = 0; s < 5; ++s) {
    const ParallelizedContact c = contact_passing_check(rng, s == 0 ? 0.0 : 0.3);
    const EngelDomain dom = prolong(c);
    std::vector<Vec> base;
    for (int i = 0; i < 1000; ++i) {
      const Vec m = uniform_point(rng, 3);
      base.push_back(m);
      const double theta = std::uniform_real_distribution<double>(0.0, 2 * kPi)(rng);
      if (!is_engel(dom.frame, Point(dom.chart, with_theta(m, theta)))) ++non_engel;
    }
    for (double theta : {0.0, 1.1, 2.9, 4.4}) {
      const std::vector<Vec> check(base.begin(), base.begin() + 3);
      const ParallelizedContact xi = contactify(dom.frame, Slice{EngelDomain::kThetaAxis, theta}, check);
      for (int i = 0; i < 200; ++i) {
        const Vec& m = base[i];
        Mat got(3, 2), want(3, 2);
        got << xi.v0.value(m), xi.v1.value(m);
        want << c.v0.value(m), c.v1.value(m);
        plane_angle = std::max(plane_angle, max_principal_angle(got, want));
      }
    }
  }
  Outcome o;
  o.at_most("non-Engel samples", static_cast<double>(non_engel), 0.0);
  o.below("slice plane angle", plane_angle, 1e-8);
  return o;
}

Outcome so3_frame()
{
  const SO3Frame f = so3_engel_frame();
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> th(0.0, 2 * kPi);
  long bad = 0;
  double brackets = 0.0, angle = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec q = with_theta(uniform_point(rng, 3, -0.5, 0.5), th(rng));
    const Point p(f.chart, q);
    // the second frame field is cos(theta) K + sin(theta) I
    const Vec expected = std::cos(q[3]) * f.k.value(q) + std::sin(q[3]) * f.i.value(q);
    angle = std::max(angle, line_angle(f.frame[1].value(q), expected));
    if (!is_engel(f.frame, p)) ++bad;
    brackets = std::max({brackets, (oracle::fd_bracket(f.i, f.j, q) - f.k.value(q)).norm(),
                         (oracle::fd_bracket(f.j, f.k, q) - f.i.value(q)).norm(),
                         (oracle::fd_bracket(f.k, f.i, q) - f.j.value(q)).norm()});
  }
  double exact = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec q = with_theta(uniform_point(rng, 3, -0.5, 0.5), th(rng));
    exact = std::max({exact, (lie_bracket(f.i, f.j).value(q) - f.k.value(q)).norm(),
                      (lie_bracket(f.j, f.k).value(q) - f.i.value(q)).norm(), (lie_bracket(f.k, f.i).value(q) - f.j.value(q)).norm()});
  }
  Outcome o;
  o.below("frame vs cos K + sin I", angle, 1e-12);
  o.at_most("non-Engel samples", static_cast<double>(bad), 0.0);
  o.below("bracket residual", exact, 1e-9);
  o.below("bracket residual (finite differences)", brackets, 1e-6);
  return o;
}

LegendrianPairJet random_pair(std::mt19937_64& rng, int order)
{
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto jet = [&](double c0) {
    Jet j(3, order);
    for (std::size_t i = 1; i < j.size(); ++i) j[i] = u(rng);
    j[0] = c0;
    return j;
  };
  for (;;) {
    LegendrianPairJet p;
    for (int i = 0; i < 3; ++i) p.y.push_back(jet((i == 1 ? 1.0 : 0.0) + u(rng)));
    for (int i = 0; i < 3; ++i) p.x.push_back(jet((i == 0 ? 1.0 : 0.0) + u(rng)));
    Mat m(3, 3);
    for (int i = 0; i < 3; ++i) {
      m(i, 0) = p.y[i].value();
      m(i, 1) = p.x[i].value();
      m(i, 2) = lie_derivative(p.y, p.x[i]).value() - lie_derivative(p.x, p.y[i]).value();
    }
    if (singular_values(m)[2] > 0.3) return p;
  }
}

Outcome legendrian_pair_normal_form()
{
  std::mt19937_64 rng(404);
  double defect = 0.0, relative = 0.0, f0 = 0.0, idem = 0.0;
  for (int t = 0; t < 50; ++t) {
    const LegendrianPairJet pair = random_pair(rng, 4);
    const NormalFormResult r = normalize_pair(pair);
    const double d = oracle::pushforward_defect(pair, r);
    double scale = r.f.max_abs();
    for (const Jet& c : r.change) scale = std::max(scale, c.max_abs());
    defect = std::max(defect, d);
    relative = std::max(relative, d / (1.0 + scale));
    f0 = std::max(f0, std::abs(r.f.value()));
    const int k = r.f.order();
    const JetTuple id = identity_jet(3, k);
    const LegendrianPairJet normal{{Jet(3, k), Jet::constant(3, k, 1.0), Jet(3, k)}, {Jet::constant(3, k, 1.0), r.f, id[1]}};
    const NormalFormResult again = normalize_pair(normal);
    const Jet f_low = r.f.truncated(again.f.order());
    for (std::size_t i = 0; i < f_low.size(); ++i) idem = std::max(idem, std::abs(again.f[i] - f_low[i]));
  }
  double round_trip = 0.0;
  for (int t = 0; t < 50; ++t) {
    const oracle::Polynomial poly = oracle::random_polynomial(rng, 3, 3);
    const ODE2 ode{make_scalar_field(ode_chart(), 3, [poly](const JetTuple& q) { return oracle::eval_poly(poly, q); })};
    const NormalFormResult r = normalize_pair(pair_jet_at(pair_from_ode(ode), Vec::Zero(3), 4), {.zero_constant = false});
    const Jet back = extract_ode_jet(r);
    const Jet expected = ode.f.jets(Vec::Zero(3), back.order())[0];
    for (std::size_t i = 0; i < expected.size(); ++i) round_trip = std::max(round_trip, std::abs(back[i] - expected[i]));
  }
  Outcome o;
  o.at_most("pushforward defect", defect, 1e-10);
  o.info("defect relative to coefficient scale", relative);
  o.at_most("|f(0)|", f0, 0.0);
  o.at_most("idempotence", idem, 1e-10);
  o.at_most("ODE round trip", round_trip, 1e-13);
  return o;
}

Outcome realization()
{
  namespace odeint = boost::numeric::odeint;
  std::mt19937_64 rng(505);
  long non_engel = 0;
  double outside = 0.0, integrator_gap = 0.0, gmax_seen = 0.0;
  bool scan_ok = true;
  int crossings = 0;
  for (int h = 0; h < 10; ++h) {
    const EngelDomain dom = prolong(contact_passing_check(rng, 0.2), ThetaRange::QuarterTurn);
    const oracle::Polynomial p = oracle::random_polynomial(rng, 3, 2, 1.0);
    const ScalarField eta = make_scalar_field(kM, 3, [p](const JetTuple& q) { return oracle::eval_poly(p, q) + sin(q[0] + 0.5 * q[2]); });
    const auto unit = bump_generator(dom.chart, eta, 0.3, 1.2);
    std::vector<Vec> inside;
    for (int i = 0; i < 1000; ++i)
      inside.push_back(with_theta(uniform_point(rng, 3), std::uniform_real_distribution<double>(0.3, 1.2)(rng)));
    const DeformedEngel d1 = deform(dom, unit);
    double g1 = 0.0;
    for (const Vec& q : inside) g1 = std::max(g1, std::abs(d1.g.value(q)[0]));
    const double amplitude = 0.45 / g1;
    const DeformedEngel d = realize_isotopy(dom, scaled(unit, amplitude), inside);
    for (const Vec& q : inside) {
      gmax_seen = std::max(gmax_seen, std::abs(d.g.value(q)[0]));
      if (!is_engel(d.structure.frame, Point(dom.chart, q))) ++non_engel;
    }
    for (int i = 0; i < 100; ++i) {
      const double theta = i % 2 ? std::uniform_real_distribution<double>(0.0, 0.3)(rng)
                                 : std::uniform_real_distribution<double>(1.2, kPi / 2)(rng);
      const Vec q = with_theta(uniform_point(rng, 3), theta);
      outside = std::max({outside, (d.structure.frame[0].value(q) - Vec::Unit(4, 3)).norm(),
                          (d.structure.frame[1].value(q) - dom.slice_tangent.value(q)).norm()});
    }
    for (int i = 0; i < 3; ++i) {
      const Vec m = uniform_point(rng, 3, -0.5, 0.5);
      std::vector<double> state(m.data(), m.data() + 3);
      auto rhs = [&](const std::vector<double>& s, std::vector<double>& ds, double theta) {
        const Vec x = d.x.value((Vec(4) << s[0], s[1], s[2], theta).finished());
        for (int j = 0; j < 3; ++j) ds[j] = x[j];
      };
      odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::vector<double>>>(1e-12, 1e-12), rhs,
                                 state, 0.0, kPi / 2, 1e-3);
      integrator_gap = std::max(integrator_gap, (bottom_to_top(d, Point(kM, m)).coords - Eigen::Map<const Vec>(state.data(), 3)).norm());
    }
    // amplitude scan: the structure is Engel on every sample when min g > -1, and when min g < -1
    // the segment from the support edge (g = 0) to the minimizer crosses g = -1 where Engel fails
    if (h < 3) {
      const std::vector<Vec> probe(inside.begin(), inside.begin() + 200);
      for (double spin : {0.5, 0.9, 1.1, 2.0}) {
        const DeformedEngel ds = deform(dom, scaled(unit, spin / g1));
        double gmin = 0.0;
        Vec argmin = probe.front();
        for (const Vec& q : probe) {
          const double g = ds.g.value(q)[0];
          if (g < gmin) gmin = g, argmin = q;
        }
        if (gmin > -1.0 + 1e-6) {
          for (const Vec& q : probe)
            if (!is_engel(ds.structure.frame, Point(dom.chart, q))) scan_ok = false;
        } else if (gmin < -1.0 - 1e-6) {
          double lo = unit.support_lo, hi = argmin[3];
          Vec q = argmin;
          for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            q[3] = 0.5 * (lo + hi);
            (ds.g.value(q)[0] > -1.0 ? lo : hi) = q[3];
          }
          q[3] = 0.5 * (lo + hi);
          if (is_engel(ds.structure.frame, Point(dom.chart, q))) scan_ok = false;
          ++crossings;
        }
      }
    }
  }
  Outcome o;
  o.below("sup |g|", gmax_seen, 0.5);
  o.at_most("non-Engel samples", static_cast<double>(non_engel), 0.0);
  o.at_most("frame change outside support", outside, 0.0);
  o.below("bottom_to_top vs dopri5", integrator_gap, 1e-6);
  o.at_most("amplitude scan mismatches", scan_ok ? 0.0 : 1.0, 0.0);
  o.at_least("scans crossing g = -1", crossings, 1.0);
  return o;
}

OneForm gray_family(double bend)
{
  return make_field<CovectorKind>(ChartId{"Mxt"}, 4, 3, [bend](const JetTuple& q) {
    const int k = q[0].order();
    const Jet s = sin(q[0]) + q[2] * q[2] - 0.5 * q[0] * q[2] + bend * q[1] * q[1] * q[2];
    return JetTuple{-1.0 * q[1] + q[3] * s, Jet(4, k), Jet::constant(4, k, 1.0)};
  });
}

std::vector<double> t_grid(double t_end, int n)
{
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(t_end * i / n);
  return g;
}

Outcome gray()
{
  std::mt19937_64 rng(606);
  std::vector<Vec> samples;
  for (int i = 0; i < 500; ++i) samples.push_back(uniform_point(rng, 3, -0.5, 0.5));
  const VectorField l = coordinate_field(kM, 3, 1);
  double plane = 0.0, line = 0.0;
  for (double t_end : {0.3, -0.3}) {
    const GraySolution sol = gray_solve(gray_family(0.0), l, t_grid(t_end, 12), samples);
    plane = std::max(plane, sol.max_plane_defect);
    line = std::max(line, sol.max_line_defect);
  }
  // s independent of y is integrated exactly by the stepper, so refinement is measured with a y-dependent term added
  const std::vector<Vec> few(samples.begin(), samples.begin() + 20);
  const GraySolution coarse = gray_solve(gray_family(1.0), l, t_grid(0.3, 2), few);
  const GraySolution fine = gray_solve(gray_family(1.0), l, t_grid(0.3, 4), few);
  Outcome o;
  o.below("plane defect", plane, 1e-6);
  o.below("line defect", line, 1e-6);
  o.at_most("refinement ratio", fine.max_plane_defect / coarse.max_plane_defect, 0.5);
  return o;
}

Outcome return_maps()
{
  std::mt19937_64 rng(707);
  const EngelDomain dom = prolong(contact_passing_check(rng, 0.3));
  const Slice s{EngelDomain::kThetaAxis, 0.0, 2 * kPi};
  double displacement = 0.0, plane_map = 0.0, residual = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vec m = uniform_point(rng, 3);
    const SliceTransport t = slice_transport(dom, s, s, Point(s.chart(dom.chart), m));
    displacement = std::max(displacement, (t.image.coords - m).norm());
    plane_map = std::max(plane_map, (t.plane_map - Mat::Identity(2, 2)).norm());
    residual = std::max(residual, t.contact_residual);
  }
  Outcome o;
  o.below("return displacement", displacement, 1e-7);
  o.below("plane map - I", plane_map, 1e-7);
  o.below("contact residual", residual, 1e-7);
  return o;
}

Outcome development_checks()
{
  std::mt19937_64 rng(808);
  const EngelDomain dom = prolong(contact_passing_check(rng, 0.3), ThetaRange::QuarterTurn);
  double inclusion = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec q = with_theta(uniform_point(rng, 3), std::uniform_real_distribution<double>(0.05, kPi / 2 - 0.05)(rng));
    const Development dev = development(dom, Point(dom.chart, q));
    inclusion = std::max({inclusion, line_angle(dev.line.direction, dom.slice_tangent.value(q).head(3)), std::abs(dev.angle - q[3])});
  }
  long non_monotone = 0;
  double fit = 0.0;
  Eigen::Matrix2d other;
  other << 1.0, 0.4, -0.3, 1.2;
  for (int leaf = 0; leaf < 100; ++leaf) {
    const Vec m = uniform_point(rng, 3);
    double prev = -1.0;
    for (int k = 0; k <= 10; ++k) {
      const double angle = development(dom, dom.at(m, 1.5 * k / 10.0)).angle;
      if (!(angle > prev)) ++non_monotone;
      prev = angle;
    }
    if (leaf < 20) {
      std::vector<double> w1, w2;
      for (int k = 0; k < 12; ++k) {
        const Point q = dom.at(m, 0.1 + 0.1 * k);
        w1.push_back(leaf_projective_coordinate(dom, q));
        w2.push_back(leaf_projective_coordinate(dom, q, other));
      }
      fit = std::max(fit, LinearFractional::fit(w1, w2).max_residual);
    }
  }
  Outcome o;
  o.below("inclusion defect", inclusion, 1e-8);
  o.at_most("non-monotone steps", static_cast<double>(non_monotone), 0.0);
  o.below("linear-fractional residual", fit, 1e-7);
  return o;
}

Outcome zoll_round_sphere()
{
  const SurfaceMetric m = round_sphere();
  ClosednessOptions opts;
  const ClosednessReport r = closedness_report(m, 200, opts, 909);
  double period = 0.0;
  for (const auto& s : r.samples)
    if (s.returned) period = std::max(period, std::abs(s.return_arclength - 2 * kPi));
  const CentralProjectionReport cp = central_projection_check(50, 0.05, 910);
  std::mt19937_64 rng(911);
  std::normal_distribution<double> n;
  double round_trip = 0.0, alignment = 0.0;
  for (int i = 0; i < 500; ++i) {
    const ContactElement e = random_element(m, rng);
    const Eigen::Vector2d x = e.coords.head(2), ray(n(rng), n(rng));
    const Eigen::Vector2d p = legendre_ray_map(m, e.chart, x, ray);
    const Eigen::Vector2d back = legendre_ray_inverse(m, e.chart, x, p);
    round_trip = std::max(round_trip, (back - ray / std::sqrt(ray.dot(m.matrix(e.chart, x) * ray))).norm());
    const Eigen::Vector2d pu = legendre_ray_map(m, e.chart, x, unit_vector(m, e));
    alignment = std::max(alignment, line_angle(legendre_pushforward(m, e), kinetic_hamiltonian_field(m, e.chart, x, pu)));
  }
  Outcome o;
  o.at_least("returned", r.returned, 200.0);
  o.below("closure defect", r.max_defect, 1e-6);
  o.at_most("|period - 2 pi|", period, 1e-6);
  o.below("central projection residual", cp.max_residual, 1e-7);
  o.below("Legendre round trip", round_trip, 1e-10);
  o.below("Hamiltonian alignment", alignment, 1e-6);
  return o;
}

}  // namespace

int main()
{
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Engel normal form flag and characteristic line", engel_normal_form},
      {"Prolongation of randomized contact structures", prolongation},
      {"SO(3)xS1 frame and bracket table", so3_frame},
      {"Legendrian pair normal form", legendrian_pair_normal_form},
      {"Realization of contact isotopies", realization},
      {"Gray/Moser solver", gray},
      {"Full-circle return maps", return_maps},
      {"Development and leaf projective structure", development_checks},
      {"Zoll round sphere", zoll_round_sphere},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %zu  %s  [%s] (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
