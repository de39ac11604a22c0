// Acceptance run: one PASS/FAIL line per criterion, followed by the numbers
// behind it. Usage: acceptance <path-to-bperc> [criterion ...]
//
// Budgeted for a single core; every draw comes from fixed streams, so the
// output is reproducible.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bperc/commands.hpp"
#include "bperc/config.hpp"
#include "bperc/experiments.hpp"
#include "bperc/forest.hpp"
#include "bperc/stats.hpp"
#include "bperc/walks.hpp"

using namespace bperc;

namespace {

std::string cli_path;

struct Verdict {
  bool pass = false;
  std::vector<std::string> notes;
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

ModelConfig model(SpaceKind k, double lambda, const std::string& law, double L, double L_a, double h, double r = 0,
                  double ly = 1) {
  ModelConfig m;
  m.space = k;
  m.lambda = lambda;
  m.radius_law = law;
  m.L = L;
  m.L_a = L_a;
  m.h = h;
  m.r = r;
  m.lambda_y = ly;
  return m;
}

// Mean and standard error.
std::pair<double, double> mean_se(const std::vector<double>& xs) {
  const auto s = stats::summarize(xs);
  return {s.mean, s.se};
}

bool within_3se(const std::vector<double>& diffs, std::string& msg) {
  auto [m, se] = mean_se(diffs);
  msg = "mean " + fmt(m) + " se " + fmt(se);
  return std::abs(m) <= 3.0 * se + 1e-15;
}

// ---------------------------------------------------------------------------
// 1. Geometry.

Verdict geometry() {
  Verdict v;
  v.pass = true;
  const int n = 400000;
  for (SpaceKind k : {SpaceKind::Euclidean2, SpaceKind::Euclidean3, SpaceKind::HyperbolicPlane}) {
    const Space sp(k);
    std::string line = std::string(to_string(k)) + " volumes:";
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
      Rng rng = Rng::stream(101, static_cast<std::uint64_t>(r * 8), to_string(k));
      std::vector<double> xs;
      xs.reserve(n);
      if (sp.hyperbolic()) {
        // Uniform in the chart disk, weighted by the metric density.
        const double rho = sp.chart_radius(r), area = std::numbers::pi * rho * rho;
        for (int i = 0; i < n; ++i) {
          const double s = rho * std::sqrt(rng.uniform()), a = 2 * std::numbers::pi * rng.uniform();
          xs.push_back(area * sp.chart_density({s * std::cos(a), s * std::sin(a)}));
        }
      } else {
        // Hit or miss in the bounding cube.
        const double box = std::pow(2 * r, sp.dim());
        for (int i = 0; i < n; ++i) {
          double q = 0;
          for (int d = 0; d < sp.dim(); ++d) q += std::pow((2 * rng.uniform() - 1) * r, 2);
          xs.push_back(q <= r * r ? box : 0.0);
        }
      }
      auto [m, se] = mean_se(xs);
      const double exact = sp.ball_volume(r), z = (m - exact) / se;
      if (std::abs(z) > 3) v.pass = false;
      line += " r=" + fmt(r, 2) + " z=" + fmt(z, 2);
    }
    double worst = 0;
    Rng rng = Rng::stream(102, 0, to_string(k));
    for (int i = 0; i < 10000; ++i) {
      const Point p = sp.sample_uniform_ball(sp.origin(), 4.0, rng), q = sp.sample_uniform_ball(sp.origin(), 4.0, rng);
      const Isometry g = sp.sample_isometry_to(sp.sample_uniform_ball(sp.origin(), 4.0, rng), rng);
      worst = std::max(worst, std::abs(sp.distance(g(p), g(q)) - sp.distance(p, q)));
    }
    if (!(worst < 1e-9)) v.pass = false;
    v.note(line + "; isometry max error " + fmt(worst, 3));
  }
  return v;
}

// ---------------------------------------------------------------------------
// 2. Void probability.

Verdict void_probability() {
  Verdict v;
  v.pass = true;
  for (double lambda : {0.5, 1.0, 2.0}) {
    const auto m = model(SpaceKind::Euclidean2, lambda, "constant 1", 11, 10, 0.1);
    std::vector<double> f;
    for (std::uint64_t s = 0; s < 100; ++s) f.push_back(sample_scene(m, 201, s).occupied_fraction(10));
    auto [mean, se] = mean_se(f);
    const double exact = 1 - std::exp(-lambda * std::numbers::pi), z = (mean - exact) / se;
    if (std::abs(z) > 3) v.pass = false;
    v.note("lambda " + fmt(lambda, 2) + ": fraction " + fmt(mean, 5) + " vs " + fmt(exact, 5) + " (z = " + fmt(z, 2) + ")");
  }
  return v;
}

// ---------------------------------------------------------------------------
// 3. Vacant-count bound.

Verdict vacant_bound() {
  Verdict v;
  // Intensities cycle over seeds so both halves span k from 0 to about 30.
  const std::vector<double> lambdas{0.05, 0.1, 0.25, 0.5, 1.0};
  std::vector<VacantCount> xs;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto m = model(SpaceKind::HyperbolicPlane, lambdas[s % lambdas.size()], "constant 1", 3.5, 2, 0.05);
    xs.push_back(vacant_count(sample_scene(m, 301, s)));
  }
  const auto fit = fit_count_bound(xs);
  std::map<std::size_t, std::size_t> worst;  // k -> max count
  for (const auto& x : xs) worst[x.k] = std::max(worst[x.k], x.count);
  std::string profile;
  for (auto [k, c] : worst)
    if (k <= 6 || k % 5 == 0) profile += " " + std::to_string(k) + ":" + std::to_string(c);
  std::size_t kmax = 0, cmax = 0;
  for (const auto& x : xs) kmax = std::max(kmax, x.k), cmax = std::max(cmax, x.count);
  v.pass = fit.violations == 0;
  v.note("C = " + fmt(fit.C) + " fitted on " + std::to_string(fit.fitted) + ", " + std::to_string(fit.violations) +
         " violations in " + std::to_string(fit.tested) + " held out; max k " + std::to_string(kmax) + ", max count " +
         std::to_string(cmax));
  v.note("max count by k:" + profile);
  return v;
}

// ---------------------------------------------------------------------------
// Forest ensemble shared by criteria 4-6.

struct ForestSeed {
  SpaceKind space;
  std::uint64_t replica;
  ModelConfig model;
  TrifurcationForest forest;
  ForestCheck check;
  PointMeasure omega;
};

struct ForestEnsemble {
  std::vector<ForestSeed> seeds;  // seeds with at least one trifurcation
  std::map<SpaceKind, std::size_t> tried;
};

const ForestEnsemble& forest_ensemble() {
  static const ForestEnsemble ens = [] {
    ForestEnsemble e;
    const std::vector<std::pair<ModelConfig, std::size_t>> plan = {
        {model(SpaceKind::Euclidean2, 0.1, "constant 2", 70, 60, 0.5, 4, 0.005), 100},
        {model(SpaceKind::HyperbolicPlane, 0.06, "constant 2", 10.5, 5, 0.5, 1.75, 0.009), 100}};
    for (const auto& [m, want] : plan) {
      std::size_t got = 0;
      for (std::uint64_t r = 0; got < want && r < 4000; ++r) {
        ++e.tried[m.space];
        const PointMeasure omega = sample_model(m, 401, r);
        const Scene s = build_scene(m, omega);
        auto ts = find_trifurcations(s, sample_auxiliary(m, m.lambda_y, 401, r, "y"), m.r, Phase::Occupied);
        if (ts.empty()) continue;
        ForestSeed fs{m.space, r, m, build_forest(s, std::move(ts), Phase::Occupied), {}, omega};
        fs.check = check_forest(fs.forest);
        e.seeds.push_back(std::move(fs));
        ++got;
      }
    }
    return e;
  }();
  return ens;
}

Verdict forest_structure() {
  Verdict v;
  const auto& ens = forest_ensemble();
  std::size_t bad = 0, vertices = 0, edges = 0, complete = 0;
  std::map<SpaceKind, std::size_t> per;
  for (const auto& s : ens.seeds) {
    const auto& k = s.check;
    if (!k.acyclic || !k.complete_vertices_full || !k.one_out_edge_per_branch || !k.branch_exchange || !k.degree_bounded)
      ++bad;
    vertices += s.forest.size();
    edges += s.forest.edges.size();
    for (char c : s.forest.interior_complete) complete += c;
    ++per[s.space];
  }
  v.pass = ens.seeds.size() >= 200 && bad == 0;
  v.note(std::to_string(ens.seeds.size()) + " seeds with trifurcations (E2 " + std::to_string(per[SpaceKind::Euclidean2]) +
         " of " + std::to_string(ens.tried.at(SpaceKind::Euclidean2)) + " tried, H2 " +
         std::to_string(per[SpaceKind::HyperbolicPlane]) + " of " +
         std::to_string(ens.tried.at(SpaceKind::HyperbolicPlane)) + "); " + std::to_string(bad) + " failing checks");
  v.note(std::to_string(vertices) + " vertices, " + std::to_string(edges) + " edges, " + std::to_string(complete) +
         " interior-complete vertices");
  return v;
}

// ---------------------------------------------------------------------------
// 5. Mass transport.

// Every atom sends unit mass to its nearest other atom. Out-mass of B(0,rho)
// is the number of atoms in it; in-mass counts atoms whose nearest neighbour
// is in it.
std::pair<double, double> nearest_neighbour_transport(const PointMeasure& omega, double rho, double margin) {
  const Space sp = omega.space();
  const Point o = sp.origin();
  double out = 0, in = 0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double di = sp.distance_unchecked(o, omega[i].point);
    if (di > rho + margin) continue;
    std::size_t best = i;
    double bd = kInfinity;
    for (std::size_t j = 0; j < omega.size(); ++j) {
      if (j == i) continue;
      const double d = sp.distance_unchecked(omega[i].point, omega[j].point);
      if (d < bd) bd = d, best = j;
    }
    if (best == i) continue;
    if (di <= rho) out += 1;
    if (sp.distance_unchecked(o, omega[best].point) <= rho) in += 1;
  }
  return {out, in};
}

Verdict mass_transport() {
  Verdict v;
  const auto& ens = forest_ensemble();
  std::vector<double> lit, avg, nn;
  double out_lit = 0, in_lit = 0, out_avg = 0, in_avg = 0, oriented = 0;
  for (const auto& s : ens.seeds) {
    const Space sp(s.space);
    const auto b = transport_balance(sp, s.forest, s.model.L_a);
    lit.push_back(b.out_origin - b.in_origin);
    avg.push_back(b.out_avg - b.in_avg);
    out_lit += b.out_origin, in_lit += b.in_origin, out_avg += b.out_avg, in_avg += b.in_avg;
    oriented += static_cast<double>(s.forest.oriented.size());
    const double margin = s.space == SpaceKind::HyperbolicPlane ? 4.0 : 8.0;
    auto [o, i] = nearest_neighbour_transport(s.omega, s.model.L_a / 2, margin);
    nn.push_back(o - i);
  }
  const double n = static_cast<double>(ens.seeds.size());
  std::string m1, m2, m3;
  const bool a = within_3se(lit, m1), b = within_3se(avg, m2), c = within_3se(nn, m3);
  v.pass = ens.seeds.size() >= 200 && a && b && c;
  v.note("oriented-edge transport over " + fmt(n, 6) + " seeds (" + fmt(oriented, 6) + " oriented edges)");
  v.note("  B(0,1): out " + fmt(out_lit / n) + " in " + fmt(in_lit / n) + ", paired difference " + m1);
  v.note("  anchor-averaged B(x,1), x uniform in B(0,L_a): out " + fmt(out_avg / n) + " in " + fmt(in_avg / n) +
         ", difference " + m2);
  v.note("  nearest-neighbour transport on the same samples, B(0,L_a/2): difference " + m3);
  return v;
}

// ---------------------------------------------------------------------------
// 6. Walk law and stationarity.

std::vector<WalkGraph> ball_tree_graphs() {
  std::vector<WalkGraph> out;
  const auto m = model(SpaceKind::Euclidean2, 0.5, "constant 1", 11.5, 10, 0.25);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const Scene s = sample_scene(m, 601, r);
    out.push_back(ball_walk_graph(s, ball_tree(s)));
  }
  return out;
}

StationarityResult stationarity(const std::vector<const WalkGraph*>& gs, const std::vector<double>& anchor_radius,
                                double intensity, int max_weight, std::uint64_t seed) {
  StationarityResult res;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    StationarityOptions opt;
    opt.n_max = 10;
    opt.anchor_radius = anchor_radius[i];
    opt.anchor_intensity = intensity;
    opt.max_weight = max_weight;
    accumulate_stationarity(*gs[i], opt, degree_observable, Rng::stream(seed, i, "stationarity"), res);
  }
  finish_stationarity(res);
  return res;
}

Verdict walk_law() {
  Verdict v;
  const auto& ens = forest_ensemble();
  const auto trees = ball_tree_graphs();
  std::vector<WalkGraph> forests;
  for (const auto& s : ens.seeds) forests.push_back(WalkGraph::from_forest(Space(s.space), s.forest));

  // One-step law on 1000 vertices of positive degree.
  std::vector<std::pair<const WalkGraph*, int>> pool;
  std::size_t forest_pool = 0;
  for (const auto& g : forests)
    for (std::size_t u = 0; u < g.size(); ++u)
      if (g.degree(static_cast<int>(u)) > 0) pool.emplace_back(&g, static_cast<int>(u)), ++forest_pool;
  for (const auto& g : trees)
    for (std::size_t u = 0; u < g.size(); ++u)
      if (g.degree(static_cast<int>(u)) > 0) pool.emplace_back(&g, static_cast<int>(u));
  Rng pick = Rng::stream(602, 0, "pick");
  double stat = 0, dof = 0;
  int rejected = 0;
  std::set<std::pair<const WalkGraph*, int>> distinct;
  for (int i = 0; i < 1000; ++i) {
    const auto [g, u] = pool[pick.below(pool.size())];
    distinct.insert({g, u});
    const int c = g->weight(u);
    std::map<int, double> idx;
    idx[u] = 0;
    for (int w : g->adj[static_cast<std::size_t>(u)]) idx.emplace(w, static_cast<double>(idx.size()));
    std::vector<double> obs(static_cast<std::size_t>(c), 0.0), exp(static_cast<std::size_t>(c), 10000.0 / c);
    Rng r = Rng::stream(602, static_cast<std::uint64_t>(i), "step");
    for (int k = 0; k < 10000; ++k) obs[static_cast<std::size_t>(idx.at(delayed_step(*g, u, r)))] += 1;
    const auto cs = stats::chi_square(obs, exp);
    stat += cs.stat;
    dof += cs.dof;
    if (cs.p < 0.01) ++rejected;
  }
  const double p = stats::chi_square_sf(stat, dof);
  const bool step_ok = p >= 0.01;
  v.note("one-step law: aggregate chi-square " + fmt(stat, 6) + " on " + fmt(dof, 6) + " dof, p = " + fmt(p, 3) + "; " +
         std::to_string(rejected) + "/1000 vertices rejected at 1%; " + std::to_string(distinct.size()) +
         " distinct vertices (" + std::to_string(forest_pool) + " from trifurcation forests)");

  // Stationarity on trifurcation forests (literal) and on ball trees.
  std::vector<const WalkGraph*> fg;
  std::vector<double> fr;
  for (std::size_t i = 0; i < forests.size(); ++i) fg.push_back(&forests[i]), fr.push_back(ens.seeds[i].model.L_a + 1);
  const auto fres = stationarity(fg, fr, 60.0, 8, 603);
  std::vector<const WalkGraph*> tg;
  std::vector<double> tr;
  for (const auto& g : trees) tg.push_back(&g), tr.push_back(11.0);
  const auto tres = stationarity(tg, tr, 60.0, 64, 604);
  auto ok = [](const StationarityResult& r) { return r.accepted >= 5000 && r.tv_max <= 0.03 && r.tv_reversal <= 0.03; };
  auto describe = [](const StationarityResult& r) {
    int maxdeg = 0;
    for (const auto& h : r.forward)
      for (auto [k, c] : h) maxdeg = std::max(maxdeg, k);
    return std::to_string(r.accepted) + " accepted walks, max TV(w(m),w(n)) " + fmt(r.tv_max, 3) + ", max TV(w(-n),w(n)) " +
           fmt(r.tv_reversal, 3) + ", censored " + fmt(r.accepted ? static_cast<double>(r.censored) / r.accepted : 0, 3) +
           ", degrees up to " + std::to_string(maxdeg);
  };
  v.note("trifurcation forests: " + describe(fres));
  v.note("ball-graph spanning trees: " + describe(tres));
  v.pass = step_ok && ok(fres) && ok(tres);
  return v;
}

// ---------------------------------------------------------------------------
// 7. Flows.

// Cycle rule: e is in the minimal spanning forest iff its endpoints are not
// joined by edges of smaller label.
std::set<std::pair<int, int>> cycle_rule_forest(std::size_t n, const std::vector<LabeledEdge>& edges) {
  std::set<std::pair<int, int>> keep;
  for (const auto& e : edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& f : edges)
      if (f.label < e.label) adj[static_cast<std::size_t>(f.u)].push_back(f.v), adj[static_cast<std::size_t>(f.v)].push_back(f.u);
    std::vector<char> seen(n, 0);
    std::vector<int> stack{e.u};
    seen[static_cast<std::size_t>(e.u)] = 1;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int y : adj[static_cast<std::size_t>(x)])
        if (!seen[static_cast<std::size_t>(y)]) seen[static_cast<std::size_t>(y)] = 1, stack.push_back(y);
    }
    if (!seen[static_cast<std::size_t>(e.v)]) keep.insert(std::minmax(e.u, e.v));
  }
  return keep;
}

Verdict flows() {
  Verdict v;
  bool ok = true;
  double kirch = 0, e1 = 0, inc = 0;
  std::size_t backbones = 0, roots = 0;
  for (const auto& m : {model(SpaceKind::Euclidean2, 1.0, "constant 1", 9.5, 8, 0.25),
                        model(SpaceKind::HyperbolicPlane, 0.5, "constant 1", 4.5, 3, 0.25)})
    for (std::uint64_t r = 0; r < 30; ++r) {
      const auto rec = transience(sample_scene(m, 701, r));
      backbones += rec.backbone > 0;
      roots += rec.roots;
      kirch = std::max(kirch, rec.max_kirchhoff);
      e1 = std::max(e1, rec.max_e1);
      inc = std::max(inc, rec.incoming);
    }
  ok = ok && kirch <= 1e-12 && e1 <= 2.0 && inc <= 1.0;
  v.note(std::to_string(backbones) + " realized backbones, " + std::to_string(roots) + " roots: max Kirchhoff defect " +
         fmt(kirch, 3) + ", max E_1 " + fmt(e1) + ", max incoming mass " + fmt(inc));

  int msf_bad = 0;
  Rng g = Rng::stream(702, 0, "graphs");
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + g.below(59);
    const double p = 0.02 + 0.2 * g.uniform();
    std::vector<LabeledEdge> edges;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (g.uniform() < p) edges.push_back({static_cast<int>(a), static_cast<int>(b), g.uniform()});
    std::set<std::pair<int, int>> got;
    for (const auto& e : minimal_spanning_forest(n, edges)) got.insert(std::minmax(e.u, e.v));
    if (got != cycle_rule_forest(n, edges)) ++msf_bad;
  }
  ok = ok && msf_bad == 0;
  v.note("spanning forest vs cycle rule: " + std::to_string(msf_bad) + "/100 mismatches");

  // Exact up to summation rounding: 3 n eps for a sum over n vertices.
  double worst = 0, prev = 0;
  bool exact = true;
  for (int depth = 8; depth <= 16; ++depth) {
    auto [t, att] = regular_tree(3, depth);
    const double cur = unit_flow(backbone(t, att), 0).e1;
    if (depth > 8) {
      const double err = std::abs(2 * cur - prev - 5.0 / 3.0);
      worst = std::max(worst, err);
      exact = exact && err <= 3.0 * static_cast<double>(t.size()) * std::numeric_limits<double>::epsilon();
    }
    prev = cur;
  }
  auto [t, att] = regular_tree(3, 16);
  Rng er = Rng::stream(703, 0, "escape");
  const auto esc = escape_probability(WalkGraph::from_tree(t, att), 0, 40000, 1000000, er);
  ok = ok && exact && std::abs(esc.p - 0.5) <= 0.02;
  v.note("3-regular tree: |2E_1(N) - E_1(N-1) - 5/3| <= " + fmt(worst, 3) + " for N = 9..16; escape " + fmt(esc.p) +
         " +- " + fmt(esc.se, 2));
  v.pass = ok;
  return v;
}

// ---------------------------------------------------------------------------
// 8. Coupling monotonicity.

Verdict monotonicity() {
  Verdict v;
  const auto m = model(SpaceKind::Euclidean2, 1.2, "constant 1", 21.5, 20, 0.25);
  std::size_t failures = 0, violations = 0, unique1 = 0, unique2 = 0;
  const int n = 200;
  for (std::uint64_t r = 0; r < n; ++r) {
    const auto rec = monotone_pair(sample_model(m, 801, r), 0.8, 1.2, m.L, m.L_a, m.h, Phase::Occupied);
    failures += rec.inclusion_failures;
    violations += rec.violation;
    unique1 += rec.crossing1 == 1;
    unique2 += rec.crossing2 == 1;
  }
  const double rate = static_cast<double>(violations) / n;
  v.pass = failures == 0 && rate <= 0.02;
  v.note("inclusion failures " + std::to_string(failures) + "; violation rate " + fmt(rate, 3) + " (" +
         std::to_string(violations) + "/" + std::to_string(n) + "); unique crossing at 0.8: " + std::to_string(unique1) +
         ", at 1.2: " + std::to_string(unique2));
  return v;
}

// ---------------------------------------------------------------------------
// 9. Connectivity decay.

DecayResult decay(const ModelConfig& m, int seeds, const std::vector<double>& grid, std::uint64_t master) {
  std::vector<Scene> scenes;
  for (int r = 0; r < seeds; ++r) scenes.push_back(sample_scene(m, master, static_cast<std::uint64_t>(r)));
  std::vector<SeededScene> ens;
  for (std::size_t r = 0; r < scenes.size(); ++r) ens.push_back({r, &scenes[r]});
  return connectivity_decay(ens, Phase::Occupied, grid, master);
}

Verdict connectivity() {
  Verdict v;
  const auto h = decay(model(SpaceKind::HyperbolicPlane, 0.06, "constant 2", 10, 8, 0.5), 200,
                       {0, 1, 2, 3, 4, 5, 6, 7}, 901);
  int inversions = 0;
  bool bad_inversion = false;
  for (std::size_t k = 1; k < h.points.size(); ++k)
    if (h.points[k].tau > h.points[k - 1].tau) {
      ++inversions;
      if (h.points[k].lo > h.points[k - 1].hi) bad_inversion = true;
    }
  const double t0 = h.points.front().tau, tmax = h.points.back().tau;
  std::string curve;
  for (const auto& p : h.points) curve += " " + fmt(p.tau, 3);
  v.note("H2 (lambda 0.06, R 2):" + curve + "; inversions " + std::to_string(inversions));
  const auto e = decay(model(SpaceKind::Euclidean2, 1.0, "constant 1", 11.5, 10, 0.25), 100, {0, 3, 6, 9}, 902);
  curve.clear();
  for (const auto& p : e.points) curve += " " + fmt(p.tau, 3);
  v.note("E2 (lambda 1):" + curve);
  v.pass = inversions <= 1 && !bad_inversion && tmax < t0 / 4 && e.points.back().tau > 0.25;
  return v;
}

// ---------------------------------------------------------------------------
// 10. Percolation inside components.

Verdict percolation() {
  Verdict v;
  const std::vector<double> grid{0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
  bool ok = true;
  std::map<double, double> median_idx;
  for (double La : {15.0, 20.0}) {
    const auto m = model(SpaceKind::Euclidean2, 2.0, "constant 1", La + 1.5, La, 0.25);
    std::vector<double> idx;
    int infinite = 0, tested = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      const Scene s = sample_scene(m, 1001, r);
      int best = -1;
      for (int id : s.boundary_components(Phase::Occupied))
        if (best < 0 || s.component(Phase::Occupied, id).cells > s.component(Phase::Occupied, best).cells) best = id;
      if (best < 0) continue;
      Rng rng = Rng::stream(1001, r, "eta");
      const auto eta = sample_poisson(s.space(), La, 0.0, grid.back(), RadiusLaw::constant(1), rng);
      try {
        const auto res = percolation_on_component(s, Phase::Occupied, best, grid, eta);
        ++tested;
        if (!res.lambda_star) {
          ++infinite;
          continue;
        }
        idx.push_back(static_cast<double>(std::find(grid.begin(), grid.end(), *res.lambda_star) - grid.begin()));
      } catch (const InvariantError& e) {
        ok = false;
        v.note(std::string("L_a ") + fmt(La, 3) + " replica " + std::to_string(r) + ": " + e.what());
      }
    }
    std::sort(idx.begin(), idx.end());
    median_idx[La] = idx.empty() ? -10 : idx[idx.size() / 2];
    if (infinite > 0 || tested == 0) ok = false;
    std::map<double, int> hist;
    for (double i : idx) ++hist[grid[static_cast<std::size_t>(i)]];
    std::string h;
    for (auto [l, c] : hist) h += " " + fmt(l, 2) + ":" + std::to_string(c);
    v.note("L_a " + fmt(La, 3) + ": " + std::to_string(tested) + " giants tested, " + std::to_string(infinite) +
           " without lambda_*; lambda_* counts" + h);
  }
  const bool stable = std::abs(median_idx[15.0] - median_idx[20.0]) <= 1;
  v.note("median lambda_* grid index " + fmt(median_idx[15.0], 2) + " vs " + fmt(median_idx[20.0], 2));
  v.pass = ok && stable;
  return v;
}

// ---------------------------------------------------------------------------
// 11. Determinism through the CLI.

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  Verdict v;
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("bperc_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"forest",
       "[model]\nspace = E2\nlambda = 0.1\nradius_law = constant 2\n[window]\nL = 70\nL_a = 60\nh = 0.5\n"
       "[trifurcation]\nr = 4\nlambda_y = 0.005\n[run]\nseed = 5\nreplicas = 24\n"},
      {"experiment pivotal",
       "[model]\nlambda = 0.6\n[window]\nL = 7.5\nL_a = 6\nh = 0.25\n[trifurcation]\nlambda_z = 0.3\n"
       "[run]\nseed = 6\nreplicas = 16\n[experiment]\nsamples = 6\ndelta = 0.4\n"},
      {"experiment connectivity",
       "[model]\nspace = H2\nlambda = 0.06\nradius_law = constant 2\n[window]\nL = 8\nL_a = 6\nh = 0.5\n"
       "[run]\nseed = 7\nreplicas = 16\n[experiment]\nt = 0,1,2,3,4,5\n"},
      {"experiment percolation",
       "[model]\nlambda = 2\n[window]\nL = 9.5\nL_a = 8\nh = 0.25\n[run]\nseed = 8\nreplicas = 8\n"}};
  bool ok = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path cfg = root / ("run" + std::to_string(i) + ".cfg");
    std::ofstream(cfg) << runs[i].second;
    std::vector<std::string> manifests;
    for (int threads : {1, 4, 8, 1}) {
      const fs::path out = root / ("out" + std::to_string(i) + "_" + std::to_string(manifests.size()));
      const std::string cmd = "\"" + cli_path + "\" " + runs[i].first + " --config \"" + cfg.string() + "\" --threads " +
                              std::to_string(threads) + " --out \"" + out.string() + "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) {
        ok = false;
        v.note(runs[i].first + ": CLI failed at " + std::to_string(threads) + " threads");
        break;
      }
      manifests.push_back(slurp(out / "manifest.json"));
    }
    bool same = manifests.size() == 4;
    for (const auto& m : manifests) same = same && m == manifests.front();
    ok = ok && same;
    v.note(runs[i].first + ": manifests at 1, 4, 8 threads and a repeat at 1 " + (same ? "identical" : "DIFFER") +
           " (" + std::to_string(manifests.empty() ? 0 : manifests.front().size()) + " bytes)");
  }
  fs::remove_all(root);
  v.pass = ok;
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-bperc> [criterion ...]\n";
    return 2;
  }
  cli_path = argv[1];
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"geometry exactness", geometry},
      {"void probability", void_probability},
      {"vacant-count bound", vacant_bound},
      {"forest structure", forest_structure},
      {"mass-transport balance", mass_transport},
      {"walk law and stationarity", walk_law},
      {"flow machinery", flows},
      {"coupling monotonicity", monotonicity},
      {"connectivity decay", connectivity},
      {"percolation in components", percolation},
      {"determinism", determinism}};
  int failed = 0;
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.note(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string line = std::string(v.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + ": " +
                             criteria[i].first + " (" + fmt(secs, 3) + " s)";
    std::cout << line << '\n';
    for (const auto& n : v.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
    lines.push_back(line);
    failed += !v.pass;
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return failed == 0 ? 0 : 1;
}
