// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line driver: reads a JSON run configuration, runs one verification
// suite and writes a report. Exit status 0 when every check passes, 1 when a
// check fails, 2 on parse or configuration errors, 3 on geometry errors.

#include "engel/engel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace engel::cli {

using nlohmann::json;

enum ExitCode { kPass = 0, kFail = 1, kParseError = 2, kGeometryError = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Check {
  std::string name;
  long samples = 0;
  double tolerance = 0.0;
  double max_defect = 0.0;
  std::string note;
  bool pass() const { return max_defect <= tolerance; }
};

struct Report {
  std::string command;
  std::uint64_t seed = 0;
  long samples = 0;
  std::vector<Check> checks;
  json outputs = json::object();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
  double wall_time_s = 0.0;

  bool pass() const
  {
    for (const auto& c : checks)
      if (!c.pass()) return false;
    return true;
  }
};

struct RunConfig {
  std::string command;
  json body = json::object();
  std::uint64_t seed = 0;
  long samples = 100;
  std::optional<double> tol;

  double tolerance(const std::string& key, double fallback) const
  {
    if (body.contains("tolerances") && body["tolerances"].contains(key)) return body["tolerances"][key].get<double>();
    return fallback;
  }
};

// ---------------------------------------------------------------------------
// config helpers

inline const json& require(const json& j, const std::string& key)
{
  if (!j.contains(key)) throw ConfigError("missing key '" + key + "'");
  return j.at(key);
}

inline std::vector<std::string> strings(const json& j, const std::string& key)
{
  const json& a = require(j, key);
  if (!a.is_array()) throw ConfigError("'" + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : a) {
    if (e.is_string()) out.push_back(e.get<std::string>());
    else if (e.is_number()) out.push_back(e.dump());
    else throw ConfigError("'" + key + "' must contain strings");
  }
  return out;
}

struct ChartSpec {
  ChartId id;
  std::vector<std::string> variables;
};

inline ChartSpec chart_spec(const json& body, int dim, const std::vector<std::string>& defaults)
{
  ChartSpec c{ChartId{"R" + std::to_string(dim)}, defaults};
  if (body.contains("chart")) {
    const json& ch = body["chart"];
    if (ch.contains("name")) c.id = ChartId{ch["name"].get<std::string>()};
    if (ch.contains("variables")) c.variables = strings(ch, "variables");
  }
  if (static_cast<int>(c.variables.size()) != dim)
    throw ConfigError("chart needs " + std::to_string(dim) + " variables");
  return c;
}

/// Per-variable sampling intervals: "box": [lo, hi] or [[lo, hi], ...].
inline std::vector<std::pair<double, double>> box(const json& body, int dim, double lo = -1.0, double hi = 1.0)
{
  std::vector<std::pair<double, double>> b(dim, {lo, hi});
  if (!body.contains("box")) return b;
  const json& j = body["box"];
  if (j.size() == 2 && j[0].is_number()) {
    for (auto& e : b) e = {j[0].get<double>(), j[1].get<double>()};
  } else {
    if (static_cast<int>(j.size()) != dim) throw ConfigError("'box' must have one interval per variable");
    for (int i = 0; i < dim; ++i) b[i] = {j[i][0].get<double>(), j[i][1].get<double>()};
  }
  for (const auto& [l, h] : b)
    if (!(l <= h)) throw ConfigError("'box' intervals must satisfy lo <= hi");
  return b;
}

inline Vec draw(std::mt19937_64& rng, const std::vector<std::pair<double, double>>& b)
{
  Vec p(static_cast<int>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) p[i] = std::uniform_real_distribution<double>(b[i].first, b[i].second)(rng);
  return p;
}

inline std::string coords(const Vec& p)
{
  std::string s = "(";
  char buf[32];
  for (int i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", p[i]);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + ")";
}

inline ParallelizedContact contact_from(const json& body, const ChartSpec& c)
{
  const VectorField v0 = parse_vector_field(c.id, c.variables, strings(body, "v0"));
  const VectorField v1 = parse_vector_field(c.id, c.variables, strings(body, "v1"));
  std::optional<OneForm> alpha;
  if (body.contains("alpha")) alpha = parse_one_form(c.id, c.variables, strings(body, "alpha"));
  return make_parallelized_contact(v0, v1, alpha);
}

inline Check count_check(std::string name, long samples, long failures, std::string note = {})
{
  return {std::move(name), samples, 0.0, static_cast<double>(failures), std::move(note)};
}

// ---------------------------------------------------------------------------
// suites

inline void verify_engel(const RunConfig& cfg, Report& rep)
{
  const ChartSpec c = chart_spec(cfg.body, 4, {"x", "y", "z", "w"});
  const json& fr = require(cfg.body, "frame");
  if (fr.size() != 2) throw ConfigError("'frame' must list two vector fields");
  std::vector<VectorField> fields;
  for (const auto& f : fr) fields.push_back(parse_vector_field(c.id, c.variables, f.get<std::vector<std::string>>()));
  const DistributionFrame d(fields);
  const double rank_tol = cfg.tolerance("rank", kDefaultRankTol);
  std::optional<VectorField> expected;
  if (cfg.body.contains("expected_characteristic"))
    expected = parse_vector_field(c.id, c.variables, strings(cfg.body, "expected_characteristic"));

  std::mt19937_64 rng(cfg.seed);
  const auto b = box(cfg.body, 4);
  long fails = 0;
  double angle = 0.0;
  std::string note;
  std::map<std::string, long> histogram;
  for (long i = 0; i < cfg.samples; ++i) {
    const Point p(c.id, draw(rng, b));
    const FlagReport r = flag_ranks(d, p, rank_tol);
    const std::string ranks = "(" + std::to_string(r.ranks[0]) + "," + std::to_string(r.ranks[1]) + "," + std::to_string(r.ranks[2]) + ")";
    ++histogram[ranks];
    rep.csv_rows.push_back({std::to_string(i), coords(p.coords), ranks});
    if (!r.is_engel_ranks()) {
      if (fails++ == 0) note = "ranks " + ranks + " at " + coords(p.coords);
      continue;
    }
    if (expected) angle = std::max(angle, line_angle(characteristic_line(d, p, rank_tol).direction, expected->value(p.coords)));
  }
  rep.csv_header = {"sample", "point", "ranks"};
  rep.checks.push_back(count_check("engel_flag", cfg.samples, fails, note));
  for (const auto& [k, v] : histogram) rep.outputs["rank_histogram"][k] = v;
  if (expected) rep.checks.push_back({"characteristic_line", cfg.samples - fails, cfg.tol.value_or(cfg.tolerance("characteristic", 1e-8)), angle});
}

inline void prolong_suite(const RunConfig& cfg, Report& rep)
{
  const ChartSpec c = chart_spec(cfg.body, 3, {"x", "y", "z"});
  const ParallelizedContact pair = contact_from(cfg.body, c);
  const std::string range = cfg.body.value("range", std::string("full"));
  if (range != "full" && range != "quarter") throw ConfigError("'range' must be 'full' or 'quarter'");
  const EngelDomain dom = prolong(pair, range == "full" ? ThetaRange::FullCircle : ThetaRange::QuarterTurn);
  const double tol = cfg.tol.value_or(cfg.tolerance("planes", 1e-8));

  std::mt19937_64 rng(cfg.seed);
  const auto b = box(cfg.body, 3);
  long non_contact = 0, non_engel = 0;
  double char_angle = 0.0;
  std::string note_c, note_e;
  std::vector<Vec> base_points;
  for (long i = 0; i < cfg.samples; ++i) {
    const Vec m = draw(rng, b);
    base_points.push_back(m);
    if (!is_contact(pair.frame(), Point(c.id, m)) && non_contact++ == 0) note_c = "not contact at " + coords(m);
    const Vec q = dom.at(m, std::uniform_real_distribution<double>(0.0, dom.theta_max())(rng)).coords;
    if (!is_engel(dom.frame, Point(dom.chart, q))) {
      if (non_engel++ == 0) note_e = "not Engel at " + coords(q);
      continue;
    }
    char_angle = std::max(char_angle, line_angle(characteristic_line(dom.frame, Point(dom.chart, q)).direction, Vec::Unit(4, 3)));
  }
  rep.checks.push_back(count_check("input_contact", cfg.samples, non_contact, note_c));
  rep.checks.push_back(count_check("prolonged_engel", cfg.samples, non_engel, note_e));
  rep.checks.push_back({"characteristic_is_dtheta", cfg.samples - non_engel, cfg.tolerance("characteristic", 1e-8), char_angle});

  std::vector<double> slices{0.0, 0.7, 1.3};
  if (cfg.body.contains("slices")) slices = cfg.body["slices"].get<std::vector<double>>();
  double plane_angle = 0.0;
  long count = 0;
  for (double theta : slices) {
    const std::vector<Vec> checks(base_points.begin(), base_points.begin() + std::min<std::size_t>(3, base_points.size()));
    const ParallelizedContact xi = contactify(dom.frame, Slice{EngelDomain::kThetaAxis, theta}, checks);
    for (const Vec& m : base_points) {
      Mat got(3, 2), want(3, 2);
      got << xi.v0.value(m), xi.v1.value(m);
      want << pair.v0.value(m), pair.v1.value(m);
      plane_angle = std::max(plane_angle, max_principal_angle(got, want));
      ++count;
    }
  }
  rep.checks.push_back({"slice_recovers_planes", count, tol, plane_angle});
}

inline void contactify_suite(const RunConfig& cfg, Report& rep)
{
  const ChartSpec c = chart_spec(cfg.body, 4, {"x", "y", "z", "w"});
  const json& fr = require(cfg.body, "frame");
  if (fr.size() != 2) throw ConfigError("'frame' must list two vector fields");
  std::vector<VectorField> fields;
  for (const auto& f : fr) fields.push_back(parse_vector_field(c.id, c.variables, f.get<std::vector<std::string>>()));
  const DistributionFrame d(fields);
  Slice s{3, 0.0};
  if (cfg.body.contains("slice")) {
    s.axis = cfg.body["slice"].value("axis", 3);
    s.value = cfg.body["slice"].value("value", 0.0);
  }
  if (s.axis < 0 || s.axis > 3) throw ConfigError("slice axis must be in 0..3");

  std::mt19937_64 rng(cfg.seed);
  const auto b = box(cfg.body, 3);
  std::vector<Vec> pts;
  for (long i = 0; i < cfg.samples; ++i) pts.push_back(draw(rng, b));
  const ParallelizedContact xi = contactify(d, s, std::span<const Vec>(pts.data(), std::min<std::size_t>(3, pts.size())));
  long non_contact = 0;
  std::string note;
  double legendrian = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec& m = pts[i];
    if (!is_contact(xi.frame(), Point(xi.chart(), m)) && non_contact++ == 0) note = "not contact at " + coords(m);
    const Vec a = xi.annihilator().value(m);
    legendrian = std::max({legendrian, std::abs(a.dot(xi.v0.value(m))) / (a.norm() * xi.v0.value(m).norm()),
                           std::abs(a.dot(xi.v1.value(m))) / (a.norm() * xi.v1.value(m).norm())});
    const Vec v0 = xi.v0.value(m), v1 = xi.v1.value(m);
    rep.csv_rows.push_back({std::to_string(i), coords(m), coords(v0), coords(v1)});
  }
  rep.csv_header = {"sample", "point", "v0", "v1"};
  rep.outputs["slice_chart"] = xi.chart().name;
  rep.checks.push_back(count_check("slice_contact", cfg.samples, non_contact, note));
  rep.checks.push_back({"frame_in_planes", cfg.samples, cfg.tolerance("legendrian", 1e-10), legendrian});
}

inline void normal_form_suite(const RunConfig& cfg, Report& rep)
{
  const ChartSpec c = chart_spec(cfg.body, 3, {"x", "y", "z"});
  const VectorField y = parse_vector_field(c.id, c.variables, strings(cfg.body, "y"));
  const VectorField x = parse_vector_field(c.id, c.variables, strings(cfg.body, "x"));
  const int order = cfg.body.value("order", 4);
  if (order < 2 || order > 5) throw ConfigError("'order' must be in 2..5");
  std::vector<Vec> points;
  if (cfg.body.contains("point")) {
    const auto p = cfg.body["point"].get<std::vector<double>>();
    if (p.size() != 3) throw ConfigError("'point' must have three coordinates");
    points.push_back(Eigen::Map<const Vec>(p.data(), 3));
  } else {
    std::mt19937_64 rng(cfg.seed);
    const auto b = box(cfg.body, 3);
    for (long i = 0; i < cfg.samples; ++i) points.push_back(draw(rng, b));
  }
  const double tol = cfg.tol.value_or(cfg.tolerance("pushforward", 1e-10));
  double defect = 0.0, f0 = 0.0, idem = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const LegendrianPairJet pair{y.jets(points[i], order), x.jets(points[i], order)};
    const NormalFormResult r = normalize_pair(pair);
    defect = std::max(defect, normal_form_defect(pair, r));
    f0 = std::max(f0, std::abs(r.f.value()));
    const int k = r.f.order();
    const JetTuple id = identity_jet(3, k);
    const LegendrianPairJet normal{{Jet(3, k), Jet::constant(3, k, 1.0), Jet(3, k)}, {Jet::constant(3, k, 1.0), r.f, id[1]}};
    const Jet again = normalize_pair(normal).f;
    for (std::size_t j = 0; j < again.size(); ++j) idem = std::max(idem, std::abs(again[j] - r.f.truncated(again.order())[j]));
    const std::string ode = jet_to_expression(extract_ode_jet(r), {"x", "y", "p"});
    rep.csv_rows.push_back({std::to_string(i), coords(points[i]), ode});
    if (i == 0) {
      rep.outputs["f_normal"] = jet_to_expression(r.f, {"x", "y", "z"});
      rep.outputs["ode_rhs"] = ode;
      json steps = json::array();
      for (const auto& s : r.steps) steps.push_back({{"step", s.name}, {"detail", s.detail}});
      rep.outputs["steps"] = steps;
    }
  }
  rep.csv_header = {"sample", "point", "ode_rhs"};
  const long n = static_cast<long>(points.size());
  rep.checks.push_back({"pushforward_invariants", n, tol, defect});
  rep.checks.push_back({"f_zero_constant", n, 0.0, f0});
  rep.checks.push_back({"idempotent", n, cfg.tolerance("idempotent", 1e-10), idem});
}

inline void realize_suite(const RunConfig& cfg, Report& rep)
{
  const ChartSpec c = chart_spec(cfg.body, 3, {"x", "y", "z"});
  const ParallelizedContact pair = contact_from(cfg.body, c);
  const EngelDomain dom = prolong(pair, ThetaRange::QuarterTurn);
  const ScalarField eta = parse_scalar_field(c.id, c.variables, require(cfg.body, "eta").get<std::string>());
  std::vector<double> support{0.2, 1.3};
  if (cfg.body.contains("support")) support = cfg.body["support"].get<std::vector<double>>();
  if (support.size() != 2) throw ConfigError("'support' must be [lo, hi]");
  const auto unit = bump_generator(dom.chart, eta, support[0], support[1]);

  std::mt19937_64 rng(cfg.seed);
  const auto b = box(cfg.body, 3);
  std::vector<Vec> inside, outside;
  for (long i = 0; i < cfg.samples; ++i) {
    const Vec m = draw(rng, b);
    Vec q(4);
    q << m, std::uniform_real_distribution<double>(support[0], support[1])(rng);
    inside.push_back(q);
    const double out = std::uniform_real_distribution<double>(0.0, std::numbers::pi / 2 - (support[1] - support[0]))(rng);
    q[3] = out < support[0] ? out : out + (support[1] - support[0]);
    outside.push_back(q);
  }
  double amplitude = cfg.body.value("amplitude", 1.0);
  if (cfg.body.contains("spin")) {
    const DeformedEngel d1 = deform(dom, unit);
    double gmax = 0.0;
    for (const Vec& q : inside) gmax = std::max(gmax, std::abs(d1.g.value(q)[0]));
    if (gmax == 0.0) throw ConfigError("Hamiltonian produces no spin on the samples");
    amplitude = cfg.body["spin"].get<double>() / gmax;
  }
  const DeformedEngel d = realize_isotopy(dom, scaled(unit, amplitude), inside);
  rep.outputs["amplitude"] = amplitude;

  long non_engel = 0;
  std::string note;
  double neg_g = -std::numeric_limits<double>::infinity(), leaf = 0.0, standard = 0.0;
  for (const Vec& q : inside) {
    const double g = d.g.value(q)[0];
    neg_g = std::max(neg_g, -g);
    if (!is_engel(d.structure.frame, Point(dom.chart, q))) {
      if (non_engel++ == 0) note = "not Engel at " + coords(q);
      continue;
    }
    leaf = std::max(leaf, line_angle(characteristic_line(d.structure.frame, Point(dom.chart, q)).direction, d.structure.frame[0].value(q)));
  }
  for (const Vec& q : outside)
    standard = std::max({standard, (d.structure.frame[0].value(q) - Vec::Unit(4, 3)).norm(),
                         (d.structure.frame[1].value(q) - dom.slice_tangent.value(q)).norm()});
  const long n = cfg.samples;
  rep.checks.push_back(count_check("deformed_engel", n, non_engel, note));
  rep.checks.push_back({"g_above_minus_one", n, 1.0 - cfg.tolerance("g_margin", 1e-6), neg_g});
  rep.checks.push_back({"leaf_is_w", n - non_engel, cfg.tolerance("leaf", 1e-6), leaf});
  rep.checks.push_back({"standard_outside_support", n, 0.0, standard});

  const Slice bottom{EngelDomain::kThetaAxis, 0.0}, top{EngelDomain::kThetaAxis, std::numbers::pi / 2};
  double residual = 0.0;
  const long transports = std::min<long>(n, cfg.body.value("transports", 5L));
  for (long i = 0; i < transports; ++i) {
    const SliceTransport t = slice_transport(d.structure, bottom, top, Point(bottom.chart(dom.chart), Vec(inside[i].head(3))));
    residual = std::max(residual, t.contact_residual);
    rep.csv_rows.push_back({std::to_string(i), coords(inside[i].head(3)), coords(t.image.coords)});
  }
  rep.csv_header = {"sample", "bottom", "top"};
  rep.checks.push_back({"transported_planes_contact", transports, cfg.tol.value_or(cfg.tolerance("transport", 1e-7)), residual});
}

inline void gray_suite(const RunConfig& cfg, Report& rep)
{
  std::vector<std::string> vars{"x", "y", "z"};
  if (cfg.body.contains("variables")) vars = strings(cfg.body, "variables");
  if (vars.size() != 3) throw ConfigError("'variables' must list three names");
  const std::string t = cfg.body.value("time", std::string("t"));
  std::vector<std::string> vt = vars;
  vt.push_back(t);
  const ChartId chart{"M"}, chart_t{"Mxt"};
  const auto fam_src = strings(cfg.body, "family");
  if (fam_src.size() != 3) throw ConfigError("'family' must list three components");
  const OneForm family = parse_field<CovectorKind>(chart_t, vt, fam_src);
  const VectorField l = parse_vector_field(chart, vars, strings(cfg.body, "legendrian"));
  const double t_end = cfg.body.value("t_end", 0.3);
  const int steps = cfg.body.value("steps", 8);
  if (!(t_end > 0.0) || steps < 1) throw ConfigError("'t_end' must be positive and 'steps' at least 1");
  auto grid = [&](int n) {
    std::vector<double> g;
    for (int i = 0; i <= n; ++i) g.push_back(t_end * i / n);
    return g;
  };
  std::mt19937_64 rng(cfg.seed);
  const auto b = box(cfg.body, 3, -0.5, 0.5);
  std::vector<Vec> pts;
  for (long i = 0; i < cfg.samples; ++i) pts.push_back(draw(rng, b));
  const GraySolution coarse = gray_solve(family, l, grid(steps), pts);
  const GraySolution fine = gray_solve(family, l, grid(2 * steps), pts);
  const double tol = cfg.tol.value_or(cfg.tolerance("plane", 1e-6));
  const long n = cfg.samples;
  rep.checks.push_back({"plane_defect", n, tol, fine.max_plane_defect});
  rep.checks.push_back({"legendrian_preserved", n, cfg.tolerance("line", 1e-6), fine.max_line_defect});
  rep.checks.push_back({"generator_along_l", n, cfg.tolerance("transverse", 1e-9), fine.max_transverse});
  rep.checks.push_back({"conformal_pullback", n, cfg.tolerance("conformal", 1e-6), fine.max_conformal_defect});
  Check refine{"refinement_ratio", n, 0.5, 0.0};
  if (coarse.max_plane_defect > 1e-12) refine.max_defect = fine.max_plane_defect / coarse.max_plane_defect;
  else refine.note = "coarse defect at rounding level; ratio not measured";
  rep.checks.push_back(refine);
  rep.outputs["coarse_plane_defect"] = coarse.max_plane_defect;
  for (std::size_t i = 0; i < fine.trajectories.size(); ++i) {
    const auto& tr = fine.trajectories[i];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", tr.log_scale.back());
    rep.csv_rows.push_back({std::to_string(i), coords(tr.start), coords(tr.points.back()), buf});
  }
  rep.csv_header = {"sample", "start", "end", "log_scale"};
}

inline SurfaceMetric metric_from(const json& body)
{
  const json m = body.value("metric", json{{"type", "round"}});
  const std::string type = m.value("type", std::string("round"));
  if (type == "round") return round_sphere();
  if (type == "flat") return flat_plane();
  if (type == "revolution") {
    const Expression sigma = Expression::parse(require(m, "sigma").get<std::string>(), {"z"});
    return sphere_of_revolution(m.value("name", std::string("revolution")), [sigma](const Jet& z) { return sigma.eval(JetTuple{z}); });
  }
  throw ConfigError("metric type must be 'round', 'flat' or 'revolution'");
}

inline void zoll_closedness_suite(const RunConfig& cfg, Report& rep)
{
  const SurfaceMetric m = metric_from(cfg.body);
  ClosednessOptions opts;
  opts.max_arclength = cfg.body.value("max_arclength", 10.0);
  opts.tol = cfg.tol.value_or(cfg.tolerance("closure", 1e-6));
  const ClosednessReport r = closedness_report(m, static_cast<int>(cfg.samples), opts, cfg.seed);
  std::optional<double> period;
  if (cfg.body.contains("expected_period")) period = cfg.body["expected_period"].get<double>();
  else if (m.name == "round") period = 2 * std::numbers::pi;
  double dev = 0.0;
  char buf[4][40];
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    if (s.returned && period) dev = std::max(dev, std::abs(s.return_arclength - *period));
    std::snprintf(buf[0], 40, "%.12g", s.start.coords[2]);
    std::snprintf(buf[1], 40, "%.12g", s.return_arclength);
    std::snprintf(buf[2], 40, "%.6g", s.defect);
    rep.csv_rows.push_back({std::to_string(i), std::to_string(s.start.chart), coords(Vec(s.start.coords.head(2))), buf[0],
                            s.returned ? "1" : "0", buf[1], buf[2]});
  }
  rep.csv_header = {"sample", "chart", "base", "psi", "returned", "return_arclength", "defect"};
  rep.outputs["metric"] = m.name;
  rep.outputs["returned"] = r.returned;
  rep.checks.push_back(count_check("returned", cfg.samples, cfg.samples - r.returned));
  rep.checks.push_back({"closure_defect", r.returned, opts.tol, r.max_defect});
  if (period) rep.checks.push_back({"period", r.returned, cfg.tolerance("period", 1e-6), dev});
}

inline void central_projection_suite(const RunConfig& cfg, Report& rep)
{
  const double spacing = cfg.body.value("spacing", 0.05);
  if (!(spacing > 0.0)) throw ConfigError("'spacing' must be positive");
  const CentralProjectionReport r = central_projection_check(static_cast<int>(cfg.samples), spacing, cfg.seed);
  for (std::size_t i = 0; i < r.arcs.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", r.arcs[i].fit.max_residual);
    rep.csv_rows.push_back({std::to_string(i), std::to_string(r.arcs[i].projected.size()), buf});
  }
  rep.csv_header = {"arc", "points", "residual"};
  rep.checks.push_back({"line_fit_residual", cfg.samples, cfg.tol.value_or(cfg.tolerance("line_fit", 1e-7)), r.max_residual});
}

inline void so3_suite(const RunConfig& cfg, Report& rep)
{
  const SO3Frame f = so3_engel_frame();
  std::mt19937_64 rng(cfg.seed);
  const std::vector<std::pair<double, double>> b{{-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}, {0.0, 2 * std::numbers::pi}};
  long non_engel = 0;
  std::string note;
  double angle = 0.0, brackets = 0.0, vertical = 0.0;
  for (long i = 0; i < cfg.samples; ++i) {
    const Vec q = draw(rng, b);
    const Point p(f.chart, q);
    if (!is_engel(f.frame, p)) {
      if (non_engel++ == 0) note = "not Engel at " + coords(q);
    } else {
      angle = std::max(angle, line_angle(characteristic_line(f.frame, p).direction, Vec::Unit(4, 3)));
    }
    brackets = std::max({brackets, (lie_bracket(f.i, f.j).value(q) - f.k.value(q)).norm(),
                         (lie_bracket(f.j, f.k).value(q) - f.i.value(q)).norm(), (lie_bracket(f.k, f.i).value(q) - f.j.value(q)).norm()});
    vertical = std::max(vertical, so3_base_velocity(f.k, q).norm());
  }
  const long n = cfg.samples;
  rep.checks.push_back(count_check("engel", n, non_engel, note));
  rep.checks.push_back({"characteristic_is_dtheta", n - non_engel, cfg.tolerance("characteristic", 1e-8), angle});
  rep.checks.push_back({"bracket_table", n, cfg.tol.value_or(cfg.tolerance("brackets", 1e-9)), brackets});
  rep.checks.push_back({"k_vertical", n, cfg.tolerance("vertical", 1e-9), vertical});
}

inline const std::map<std::string, void (*)(const RunConfig&, Report&)>& suites()
{
  static const std::map<std::string, void (*)(const RunConfig&, Report&)> s{
      {"verify-engel", verify_engel},       {"prolong", prolong_suite},
      {"contactify", contactify_suite},     {"normal-form", normal_form_suite},
      {"realize", realize_suite},           {"gray", gray_suite},
      {"zoll-closedness", zoll_closedness_suite}, {"central-projection", central_projection_suite},
      {"so3", so3_suite}};
  return s;
}

// ---------------------------------------------------------------------------
// output

inline json to_json(const Report& r, bool with_time = true)
{
  json checks = json::array();
  for (const auto& c : r.checks) {
    json j{{"name", c.name}, {"samples", c.samples}, {"tolerance", c.tolerance}, {"max_defect", c.max_defect}, {"pass", c.pass()}};
    if (!c.note.empty()) j["note"] = c.note;
    checks.push_back(j);
  }
  json out{{"command", r.command}, {"seed", r.seed}, {"samples", r.samples}, {"checks", checks},
           {"outputs", r.outputs},  {"pass", r.pass()}, {"version", std::string("engel ") + kVersion}};
  if (with_time) out["wall_time_s"] = r.wall_time_s;
  return out;
}

inline std::string to_text(const Report& r)
{
  std::ostringstream os;
  os << "command: " << r.command << "  seed: " << r.seed << "  samples: " << r.samples << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %8s %12s %12s  %s\n", "check", "samples", "tolerance", "max_defect", "result");
  os << line;
  for (const auto& c : r.checks) {
    std::snprintf(line, sizeof line, "%-28s %8ld %12.3e %12.3e  %s\n", c.name.c_str(), c.samples, c.tolerance, c.max_defect,
                  c.pass() ? "PASS" : "FAIL");
    os << line;
    if (!c.note.empty()) os << "    note: " << c.note << "\n";
  }
  for (const auto& [k, v] : r.outputs.items()) os << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  os << "overall: " << (r.pass() ? "PASS" : "FAIL") << "\n";
  std::snprintf(line, sizeof line, "version: engel %s  wall time: %.3f s\n", kVersion, r.wall_time_s);
  os << line;
  return os.str();
}

inline std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string to_csv(const Report& r)
{
  std::ostringstream os;
  auto row = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
    os << "\n";
  };
  if (!r.csv_header.empty()) {
    row(r.csv_header);
    for (const auto& cells : r.csv_rows) row(cells);
    return os.str();
  }
  row({"name", "samples", "tolerance", "max_defect", "pass"});
  char a[32], b[32];
  for (const auto& c : r.checks) {
    std::snprintf(a, sizeof a, "%.17g", c.tolerance);
    std::snprintf(b, sizeof b, "%.17g", c.max_defect);
    row({c.name, std::to_string(c.samples), a, b, c.pass() ? "true" : "false"});
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// entry point

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Numerical verification suites for Engel structures", "engel_cli"};
  app.set_version_flag("--version", std::string("engel ") + kVersion);
  std::string command, config_path, out_path, format = "json";
  std::optional<std::uint64_t> seed;
  std::optional<long> samples;
  std::optional<double> tol;
  std::vector<std::string> names;
  for (const auto& [k, v] : suites()) names.push_back(k);
  app.add_option("command", command, "suite to run")->required()->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--samples", samples, "number of samples")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "primary tolerance")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "write the report here instead of stdout");
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"json", "text", "csv"}));

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kPass;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParseError;
  }

  RunConfig cfg;
  cfg.command = command;
  Report rep;
  rep.command = command;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config '" + config_path + "'");
      cfg.body = json::parse(in);
      if (!cfg.body.is_object()) throw ConfigError("config must be a JSON object");
      if (cfg.body.contains("command") && cfg.body["command"] != command)
        throw ConfigError("config is for '" + cfg.body["command"].get<std::string>() + "'");
    }
    cfg.seed = seed.value_or(cfg.body.value("seed", std::uint64_t{0}));
    cfg.samples = samples.value_or(cfg.body.value("samples", 100L));
    if (cfg.samples <= 0) throw ConfigError("samples must be positive");
    cfg.tol = tol;
    if (!tol && cfg.body.contains("tol")) cfg.tol = cfg.body["tol"].get<double>();
    if (cfg.tol && !(*cfg.tol > 0.0)) throw ConfigError("tolerances must be positive");
    rep.seed = cfg.seed;
    rep.samples = cfg.samples;

    const auto start = std::chrono::steady_clock::now();
    suites().at(command)(cfg, rep);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParseError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kParseError;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kParseError;
  } catch (const GeometryError& e) {
    err << "geometry error: " << e.what() << "\n";
    return kGeometryError;
  } catch (const std::domain_error& e) {
    err << "geometry error: " << e.what() << "\n";
    return kGeometryError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kParseError;
  }

  const std::string body = format == "json" ? to_json(rep).dump(2) + "\n" : format == "text" ? to_text(rep) : to_csv(rep);
  if (out_path.empty()) {
    out << body;
  } else {
    std::ofstream f(out_path);
    if (!f) {
      err << "cannot write '" << out_path << "'\n";
      return kParseError;
    }
    f << body;
  }
  return rep.pass() ? kPass : kFail;
}

}  // namespace engel::cli
