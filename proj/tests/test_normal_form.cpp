// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "engel/normal_form.hpp"
#include "oracles.hpp"

#include <random>

using namespace engel;

namespace {

MultiIndex mi(int a, int b, int c)
{
  return MultiIndex{static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c)};
}

Jet random_jet(std::mt19937_64& rng, int n, int order, double c0, double scale)
{
  std::uniform_real_distribution<double> u(-scale, scale);
  Jet j(n, order);
  for (std::size_t i = 1; i < j.size(); ++i) j[i] = u(rng);
  j[0] = c0;
  return j;
}

// Random pair, redrawn until {Y, X, [Y, X]} at the origin is well conditioned.
LegendrianPairJet random_pair(std::mt19937_64& rng, int order)
{
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (;;) {
    LegendrianPairJet p;
    for (int i = 0; i < 3; ++i) p.y.push_back(random_jet(rng, 3, order, (i == 1 ? 1.0 : 0.0) + u(rng), 0.5));
    for (int i = 0; i < 3; ++i) p.x.push_back(random_jet(rng, 3, order, (i == 0 ? 1.0 : 0.0) + u(rng), 0.5));
    Mat m(3, 3);
    for (int i = 0; i < 3; ++i) {
      m(i, 0) = p.y[i].value();
      m(i, 1) = p.x[i].value();
      m(i, 2) = lie_derivative(p.y, p.x[i]).value() - lie_derivative(p.x, p.y[i]).value();
    }
    if (singular_values(m)[2] > 0.3) return p;
  }
}

// Independent check of the normal-form identities without inverting the change.
LegendrianPairJet normal_pair(const Jet& f)
{
  const int k = f.order();
  const JetTuple id = identity_jet(3, k);
  return {{Jet(3, k), Jet::constant(3, k, 1.0), Jet(3, k)}, {Jet::constant(3, k, 1.0), f, id[1]}};
}

ODE2 polynomial_ode(const oracle::Polynomial& p)
{
  return {make_scalar_field(ode_chart(), 3, [p](const JetTuple& q) { return oracle::eval_poly(p, q); })};
}

}  // namespace

TEST(Straighten, StraightFieldGivesIdentity)
{
  const JetTuple id = identity_jet(3, 4);
  const JetTuple y{Jet(3, 4), Jet::constant(3, 4, 1.0), Jet(3, 4)};
  const JetTuple c = straighten(y);
  for (int i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < id[i].size(); ++k) EXPECT_EQ(c[i][k], id[i][k]);
}

TEST(Straighten, ShearedFieldGivesZMinusXY)
{
  const JetTuple q = identity_jet(3, 4);
  const JetTuple y{Jet(3, 4), Jet::constant(3, 4, 1.0), q[0]};
  const JetTuple c = straighten(y);
  EXPECT_DOUBLE_EQ(c[2].coeff(mi(0, 0, 1)), 1.0);
  EXPECT_DOUBLE_EQ(c[2].coeff(mi(1, 1, 0)), -1.0);
  for (std::size_t i = 0; i < c[2].size(); ++i) {
    const auto& e = c[2].exponent(i);
    if ((e[0] == 0 && e[1] == 0 && e[2] == 1) || (e[0] == 1 && e[1] == 1 && e[2] == 0)) continue;
    EXPECT_EQ(c[2][i], 0.0);
  }
  // pushforward is d/dy
  const JetTuple pushed = pushforward(c, y);
  EXPECT_NEAR(pushed[1].value(), 1.0, 1e-15);
  for (int i : {0, 2})
    for (std::size_t k = 0; k < pushed[i].size(); ++k) EXPECT_NEAR(pushed[i][k], 0.0, 1e-14);
}

TEST(Straighten, ScaledFieldGivesIdentityWithScale)
{
  const JetTuple q = identity_jet(3, 4);
  const JetTuple y{Jet(3, 4), 1.0 + q[0], Jet(3, 4)};
  const JetTuple c = straighten(y);
  for (int i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < c[i].size(); ++k) EXPECT_EQ(c[i][k], identity_jet(3, 5)[i][k]);
  LegendrianPairJet pair{y, {Jet::constant(3, 4, 1.0), Jet(3, 4), q[1]}};
  const NormalFormResult r = normalize_pair(pair);
  const Jet expected = reciprocal(1.0 + q[0]).truncated(3);
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(r.y_scale[k], expected[k], 1e-14);
}

TEST(Straighten, RandomFieldsArePushedToDy)
{
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const LegendrianPairJet p = random_pair(rng, 4);
    const JetTuple c = straighten(p.y);
    const JetTuple pushed = pushforward(c, p.y);
    EXPECT_GT(pushed[1].value(), 0.0);
    for (int i : {0, 2})
      for (std::size_t k = 0; k < pushed[i].size(); ++k) EXPECT_NEAR(pushed[i][k], 0.0, 1e-12);
  }
  EXPECT_THROW(straighten(JetTuple(3, Jet(3, 3))), GeometryError);
}

TEST(NormalForm, YComponentIsTheDerivativeOfF3)
{
  // Y = d/dy, X = d/dx + f2 d/dy + f3 d/dz with f2(0) = f3(0) = 0; new coordinate ybar = f3.
  // Finite differences of ybar along X decide between L_X f3 and f3 + L_X f2.
  std::mt19937_64 rng(2);
  const oracle::Polynomial f2 = oracle::random_polynomial(rng, 3, 3, 0.5);
  oracle::Polynomial f3 = oracle::random_polynomial(rng, 3, 3, 0.5);
  auto f2v = [&](const Vec& q) { return oracle::eval_poly(f2, q) - oracle::eval_poly(f2, Vec::Zero(3)); };
  auto f3v = [&](const Vec& q) { return oracle::eval_poly(f3, q) - oracle::eval_poly(f3, Vec::Zero(3)) + q[1]; };
  auto xv = [&](const Vec& q) { return (Vec(3) << 1.0, f2v(q), f3v(q)).finished(); };
  const double h = 1e-5;
  double worst_derivative = 0.0, best_printed = 1e300;
  for (int s = 0; s < 20; ++s) {
    const Vec q = oracle::uniform_point(rng, 3, -0.3, 0.3);
    const Vec v = xv(q);
    const double along = (f3v(q + h * v) - f3v(q - h * v)) / (2 * h);  // X(ybar)
    const Vec g3 = oracle::fd_jacobian([&](const Vec& p) { return Vec::Constant(1, f3v(p)); }, q).row(0);
    const Vec g2 = oracle::fd_jacobian([&](const Vec& p) { return Vec::Constant(1, f2v(p)); }, q).row(0);
    worst_derivative = std::max(worst_derivative, std::abs(along - g3.dot(v)));
    best_printed = std::min(best_printed, std::abs(along - (f3v(q) + g2.dot(v))));
  }
  EXPECT_LT(worst_derivative, 1e-7);
  EXPECT_GT(best_printed, 1e-4);
}

TEST(NormalForm, AlreadyNormalPairIsFixed)
{
  const NormalFormResult r = normalize_pair(normal_pair(Jet(3, 4)));
  const JetTuple id = identity_jet(3, 4);
  for (int i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < id[i].size(); ++k) EXPECT_EQ(r.change[i][k], id[i][k]);
  EXPECT_EQ(r.f.max_abs(), 0.0);
  EXPECT_EQ(r.f.order(), 3);
}

TEST(NormalForm, ConstantTermsAreShiftedAway)
{
  const double a = 0.7, b = -0.4;
  const JetTuple q = identity_jet(3, 4);
  const LegendrianPairJet pair{{Jet(3, 4), Jet::constant(3, 4, 1.0), Jet(3, 4)},
                               {Jet::constant(3, 4, 1.0), Jet::constant(3, 4, a), b + q[1]}};
  const NormalFormResult r = normalize_pair(pair);
  auto it = std::find_if(r.steps.begin(), r.steps.end(), [](const NormalFormStep& s) { return s.name == "shift"; });
  ASSERT_NE(it, r.steps.end());
  EXPECT_EQ(it->detail, "c1=" + detail::fmt(-a) + " c2=" + detail::fmt(-b));
  // ybar = y - a x, zbar = z - b x after the shift
  EXPECT_DOUBLE_EQ(r.change[2].coeff(mi(1, 0, 0)), -b);
  EXPECT_LT(oracle::pushforward_defect(pair, r), 1e-12);
}

TEST(NormalForm, RandomPairsSatisfyInvariants)
{
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const LegendrianPairJet p = random_pair(rng, 4);
    const NormalFormResult r = normalize_pair(p);
    EXPECT_LE(oracle::pushforward_defect(p, r), 1e-10) << "trial " << t;
    EXPECT_EQ(r.f.value(), 0.0);
    EXPECT_GT(r.y_scale.value(), 0.0);
    EXPECT_GT(r.x_scale.value(), 0.0);
    EXPECT_EQ(r.f.order(), 3);
  }
}

TEST(NormalForm, SignRulesAndSwap)
{
  const JetTuple q = identity_jet(3, 4);
  const Jet zero(3, 4), one = Jet::constant(3, 4, 1.0);
  // X(0) has no x-component: x and z exchange roles
  const LegendrianPairJet swapped{{zero, one, zero}, {q[1], zero, one}};
  const NormalFormResult rs = normalize_pair(swapped);
  EXPECT_TRUE(std::any_of(rs.steps.begin(), rs.steps.end(), [](const auto& s) { return s.name == "swap_xz"; }));
  EXPECT_LE(oracle::pushforward_defect(swapped, rs), 1e-10);

  // negative x-component and negative twist
  const LegendrianPairJet flipped{{zero, one, zero}, {-1.0 * one, zero, -1.0 * q[1]}};
  const NormalFormResult rf = normalize_pair(flipped);
  EXPECT_TRUE(std::any_of(rf.steps.begin(), rf.steps.end(), [](const auto& s) { return s.name == "flip_x"; }));
  EXPECT_LE(oracle::pushforward_defect(flipped, rf), 1e-10);

  // Y = -d/dy
  const LegendrianPairJet reversed{{zero, -1.0 * one, zero}, {one, zero, q[1]}};
  EXPECT_LE(oracle::pushforward_defect(reversed, normalize_pair(reversed)), 1e-10);
}

TEST(NormalForm, ErrorsOnDegeneratePairs)
{
  const JetTuple q = identity_jet(3, 4);
  const Jet zero(3, 4), one = Jet::constant(3, 4, 1.0);
  // integrable: X = d/dx, Y = d/dy
  EXPECT_THROW(normalize_pair({{zero, one, zero}, {one, zero, zero}}), GeometryError);
  // X parallel to Y at the origin
  EXPECT_THROW(normalize_pair({{zero, one, zero}, {q[0], one, q[0]}}), GeometryError);
}

TEST(NormalForm, Idempotent)
{
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const NormalFormResult r = normalize_pair(random_pair(rng, 5));
    const NormalFormResult again = normalize_pair(normal_pair(r.f));
    const JetTuple id = identity_jet(3, r.f.order());
    for (int i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < id[i].size(); ++k) EXPECT_NEAR(again.change[i][k], id[i][k], 1e-10);
    const Jet f_low = r.f.truncated(again.f.order());
    for (std::size_t k = 0; k < f_low.size(); ++k) EXPECT_NEAR(again.f[k], f_low[k], 1e-10);
  }
}

TEST(NormalForm, RescalingTheFieldsLeavesFUnchanged)
{
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    LegendrianPairJet p = random_pair(rng, 4);
    const NormalFormResult r = normalize_pair(p);
    const Jet a = random_jet(rng, 3, 4, 1.5, 0.3), b = random_jet(rng, 3, 4, 0.7, 0.3);
    for (auto& c : p.y) c = a * c;
    for (auto& c : p.x) c = b * c;
    const NormalFormResult s = normalize_pair(p);
    for (std::size_t k = 0; k < r.f.size(); ++k) EXPECT_NEAR(s.f[k], r.f[k], 1e-10);
  }
}

TEST(OdeCorrespondence, RoundTripIsExact)
{
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const oracle::Polynomial poly = oracle::random_polynomial(rng, 3, 3);
    const ODE2 ode = polynomial_ode(poly);
    const ParallelizedContact pair = pair_from_ode(ode);
    const NormalFormResult r = normalize_pair(pair_jet_at(pair, Vec::Zero(3), 4), {.zero_constant = false});
    const Jet back = extract_ode_jet(r);
    const Jet expected = ode.f.jets(Vec::Zero(3), 3)[0];
    for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(back[k], expected[k], 1e-13);
    const Vec q = oracle::uniform_point(rng, 3, -0.5, 0.5);
    EXPECT_NEAR(extract_ode(r).f.value(q)[0], oracle::eval_poly(poly, q), 1e-12);  // degree 3 is captured fully
  }
}

TEST(OdeCorrespondence, FlatAndHarmonicExamples)
{
  const ODE2 flat{make_scalar_field(ode_chart(), 3, [](const JetTuple& q) { return Jet(3, q[0].order()); })};
  const ParallelizedContact pf = pair_from_ode(flat);
  const NormalFormResult rf = normalize_pair(pair_jet_at(pf, Vec::Zero(3), 4));
  EXPECT_EQ(rf.f.max_abs(), 0.0);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const Vec q = oracle::uniform_point(rng, 3);
    EXPECT_TRUE(is_contact(pf.frame(), Point(ode_chart(), q)));
    EXPECT_EQ(pf.alpha->value(q).dot(pf.v0.value(q)), 0.0);
    EXPECT_EQ(pf.alpha->value(q).dot(pf.v1.value(q)), 0.0);
  }

  // y'' = -y: solutions A cos x + B sin x
  const ODE2 harmonic{make_scalar_field(ode_chart(), 3, [](const JetTuple& q) { return -1.0 * q[1]; })};
  const ParallelizedContact ph = pair_from_ode(harmonic);
  for (int i = 0; i < 10; ++i) {
    const double a = std::uniform_real_distribution<double>(-1, 1)(rng), b = std::uniform_real_distribution<double>(-1, 1)(rng);
    const FlowResult r = flow(ph.v1, Point(ode_chart(), (Vec(3) << 0.0, a, b).finished()), 1.3, 1e-11);
    EXPECT_NEAR(r.endpoint.coords[0], 1.3, 1e-12);
    EXPECT_NEAR(r.endpoint.coords[1], a * std::cos(1.3) + b * std::sin(1.3), 1e-7);
  }
}

TEST(PointMaps, IdentityAndShear)
{
  const JetTuple xy = identity_jet(2, 4);
  const JetTuple id = prolong_point_map(xy);
  const JetTuple e = identity_jet(3, 3);
  for (int i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < e[i].size(); ++k) EXPECT_EQ(id[i][k], e[i][k]);

  const double c = 0.6;
  const JetTuple sh = prolong_point_map({xy[0], xy[1] + c * xy[0]});
  EXPECT_DOUBLE_EQ(sh[2].value(), c);
  EXPECT_DOUBLE_EQ(sh[2].gradient(2), 1.0);
  for (std::size_t k = 2; k < sh[2].size(); ++k)
    if (sh[2].degree_of(k) >= 1 && k != 3) EXPECT_EQ(sh[2][k], 0.0);

  EXPECT_THROW(prolong_point_map({xy[1], xy[0]}), GeometryError);
}

TEST(PointMaps, PreserveTheContactStructure)
{
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    JetTuple phi = identity_jet(2, 5);
    for (auto& c : phi)
      for (std::size_t k = 3; k < c.size(); ++k) c[k] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    const double p0 = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    const JetTuple m = prolong_point_map(phi, p0);
    // pullback of dy - p dx is (dY - P dX); compare with dy - p dx componentwise
    const Jet p = Jet::variable(3, 3, 2, p0);
    JetTuple pulled, standard{-1.0 * p, Jet::constant(3, 3, 1.0), Jet(3, 3)};
    for (int v = 0; v < 3; ++v) pulled.push_back(m[1].derivative(v) - m[2].truncated(3) * m[0].derivative(v));
    const JetTuple cr = cross(pulled, standard);
    for (const auto& c : cr)
      for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(c[k], 0.0, 1e-12);
  }
}

TEST(PointMaps, RotationKeepsStraightLinesStraight)
{
  const double a = 0.4;
  const JetTuple xy = identity_jet(2, 6);
  const JetTuple rot{std::cos(a) * xy[0] - std::sin(a) * xy[1], std::sin(a) * xy[0] + std::cos(a) * xy[1]};
  JetTuple m = prolong_point_map(rot);
  for (auto& c : m) c -= c.value();
  const ParallelizedContact flat = pair_from_ode({make_scalar_field(ode_chart(), 3, [](const JetTuple& q) { return Jet(3, q[0].order()); })});
  const JetTuple v0 = transform_field(m, flat.v0.jets(Vec::Zero(3), 5));
  const JetTuple v1 = transform_field(m, flat.v1.jets(Vec::Zero(3), 5));
  const NormalFormResult r = normalize_pair({relabel_normal_ode(v0), relabel_normal_ode(v1)});
  EXPECT_LT(r.f.max_abs(), 1e-12);
}

TEST(PointMaps, TransformedEquationMatchesClassicalFormula)
{
  // point map fixing the origin with Y_x(0) = 0 so the pushed pair is already normalized
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int t = 0; t < 5; ++t) {
    const JetTuple xy = identity_jet(2, 6);
    const double xx = u(rng), xyc = u(rng), yy = u(rng), yx2 = u(rng), yxy = u(rng);
    const double a11 = 1.0 + u(rng), a12 = u(rng), a22 = 1.0 + u(rng);
    const JetTuple phi{a11 * xy[0] + a12 * xy[1] + xx * xy[0] * xy[0] + xyc * xy[0] * xy[1],
                       a22 * xy[1] + yx2 * xy[0] * xy[0] + yxy * xy[0] * xy[1] + yy * xy[1] * xy[1]};
    oracle::Polynomial poly = oracle::random_polynomial(rng, 3, 2, 0.3);
    // choose f(0) so that the transformed equation vanishes at the origin: f(0) = -Y_xx(0) / Y_y(0)
    for (auto& mono : poly)
      if (mono.exps == std::vector<int>{0, 0, 0}) mono.coeff = -2.0 * yx2 / a22;
    const ODE2 ode = polynomial_ode(poly);
    const ParallelizedContact pair = pair_from_ode(ode);

    const JetTuple m = prolong_point_map(phi);
    const JetTuple v0 = transform_field(m, pair.v0.jets(Vec::Zero(3), 5));
    const JetTuple v1 = transform_field(m, pair.v1.jets(Vec::Zero(3), 5));
    const NormalFormResult r = normalize_pair({relabel_normal_ode(v0), relabel_normal_ode(v1)}, {.zero_constant = false});
    const ODE2 g = extract_ode(r);

    // classical transformation of y'' = f under (X(x, y), Y(x, y)), with exact polynomial derivatives
    auto classical = [&](const Vec& q) {
      const JetTuple s = seed(std::span<const double>(q.data(), 2), 2);
      const JetTuple ph = {phi[0], phi[1]};
      auto eval = [&](const Jet& j) {
        Jet r(2, 2);
        for (std::size_t i = 0; i < j.size(); ++i) {
          Jet term = Jet::constant(2, 2, j[i]);
          const auto& e = j.exponent(i);
          term = term * ipow(s[0], e[0]) * ipow(s[1], e[1]);
          r += term;
        }
        return r;
      };
      const Jet X = eval(ph[0]), Y = eval(ph[1]);
      auto d2 = [](const Jet& j, int a, int b) { return j.derivative(a).derivative(b).value(); };
      const double p = q[2], f = oracle::eval_poly(poly, q);
      const double xd = X.gradient(0) + p * X.gradient(1), yd = Y.gradient(0) + p * Y.gradient(1);
      const double xdd = d2(X, 0, 0) + 2 * p * d2(X, 0, 1) + p * p * d2(X, 1, 1) + X.gradient(1) * f;
      const double ydd = d2(Y, 0, 0) + 2 * p * d2(Y, 0, 1) + p * p * d2(Y, 1, 1) + Y.gradient(1) * f;
      return std::pair{Vec((Vec(3) << X.value(), Y.value(), yd / xd).finished()), (ydd * xd - yd * xdd) / (xd * xd * xd)};
    };

    double worst = 0.0;
    for (int i = 0; i < 27; ++i) {
      const Vec q = 0.004 * (Vec(3) << i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1).finished();
      const auto [image, value] = classical(q);
      worst = std::max(worst, std::abs(g.f.value(image)[0] - value));
    }
    EXPECT_LT(worst, 1e-8) << "trial " << t;

    // the classical formula itself against an integrated solution mapped through phi
    const Vec q0 = (Vec(3) << 0.01, -0.02, 0.05).finished();
    const double h = 1e-3;
    std::vector<Vec> img;
    for (double s : {-h, 0.0, h}) {
      const Vec q = flow(pair.v1, Point(ode_chart(), q0), s, 1e-13).endpoint.coords;
      img.push_back(classical(q).first.head(2));
    }
    const Vec vel = (img[2] - img[0]) / (2 * h), acc = (img[2] - 2 * img[1] + img[0]) / (h * h);
    const double second = (acc[1] * vel[0] - vel[1] * acc[0]) / std::pow(vel[0], 3);
    EXPECT_NEAR(second, classical(q0).second, 1e-5);
  }
}
