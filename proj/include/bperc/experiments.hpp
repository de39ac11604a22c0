#pragma once

// Finite-window experiments: component properties and their cache, pivotal
// scans, the indistinguishability harness, thinning-coupled monotonicity,
// connectivity decay, percolation inside components, mass-transport balance
// on the trifurcation forest, the vacant-count bound, and backbone flows on
// labeled ball graphs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/forest.hpp"
#include "bperc/geometry.hpp"
#include "bperc/process.hpp"
#include "bperc/rng.hpp"
#include "bperc/scene.hpp"
#include "bperc/spatial.hpp"
#include "bperc/stats.hpp"
#include "bperc/union_find.hpp"
#include "bperc/walks.hpp"

namespace bperc {

// ---------------------------------------------------------------------------
// Component properties.

struct ComponentSummary {
  bool boundary = false;
  std::size_t cells = 0;
  double volume = 0.0;
};

struct ComponentProperty {
  std::string name;
  bool invariant = true;
  std::function<bool(const Scene&, const ComponentRef&)> evaluate;
  // Set when the value depends only on the summary; enables incremental
  // insertion scans.
  std::function<bool(const ComponentSummary&)> summary;
};

inline ComponentSummary summarize(const ComponentRef& c) { return {c.boundary, c.cells, c.volume}; }

inline ComponentProperty boundary_contact() {
  ComponentProperty p;
  p.name = "boundary-contact";
  p.summary = [](const ComponentSummary& s) { return s.boundary; };
  p.evaluate = [f = p.summary](const Scene&, const ComponentRef& c) { return f(summarize(c)); };
  return p;
}

inline ComponentProperty cell_count_at_least(std::size_t v) {
  ComponentProperty p;
  p.name = "cell-count>=" + std::to_string(v);
  p.summary = [v](const ComponentSummary& s) { return s.cells >= v; };
  p.evaluate = [f = p.summary](const Scene&, const ComponentRef& c) { return f(summarize(c)); };
  return p;
}

// Negative control: depends on labeling order, not on geometry.
inline ComponentProperty component_id_even() {
  ComponentProperty p;
  p.name = "component-id-even";
  p.invariant = false;
  p.evaluate = [](const Scene&, const ComponentRef& c) { return c.id % 2 == 0; };
  return p;
}

inline ComponentProperty contains_trifurcation(double r, PointMeasure Y) {
  ComponentProperty p;
  p.name = "contains-trifurcation(" + detail::format_double(r) + ")";
  auto memo = std::make_shared<std::map<std::pair<std::uint64_t, int>, std::vector<int>>>();
  p.evaluate = [r, Y = std::move(Y), memo](const Scene& s, const ComponentRef& c) {
    const auto key = std::make_pair(s.hash(), static_cast<int>(c.phase));
    auto it = memo->find(key);
    if (it == memo->end()) {
      std::vector<int> comps;
      for (const auto& t : find_trifurcations(s, Y, r, c.phase)) comps.push_back(t.component);
      it = memo->emplace(key, std::move(comps)).first;
    }
    return std::find(it->second.begin(), it->second.end(), c.id) != it->second.end();
  };
  return p;
}

inline ComponentProperty frequency_at_least(double t, int walks, int steps, std::uint64_t seed) {
  ComponentProperty p;
  p.name = "frequency>=" + detail::format_double(t);
  p.evaluate = [=](const Scene& s, const ComponentRef& c) {
    return component_frequency(s, c.phase, c.id, walks, steps, Rng::stream(seed, s.hash(), "frequency")).mean >= t;
  };
  return p;
}

// Frequency at least the median over the scene's boundary-contacting
// components of the same phase (fixed walk budget per scene).
inline ComponentProperty frequency_above_median(int walks, int steps, std::uint64_t seed) {
  ComponentProperty p;
  p.name = "frequency>=median";
  auto memo = std::make_shared<std::map<std::pair<std::uint64_t, int>, std::map<int, double>>>();
  p.evaluate = [=](const Scene& s, const ComponentRef& c) {
    const auto key = std::make_pair(s.hash(), static_cast<int>(c.phase));
    auto it = memo->find(key);
    if (it == memo->end()) {
      std::map<int, long> hits;
      for (int i = 0; i < walks; ++i) {
        Rng r = Rng::stream(seed, s.hash(), "frequency").derive(static_cast<std::uint64_t>(i), "walk");
        const auto w = ambient_walk(s.space(), steps, s.analysis_radius(), r);
        for (std::size_t j = 1; j < w.points.size(); ++j) {
          const auto cell = s.cell_of(w.points[j]);
          if (cell && s.phase(*cell) == c.phase) ++hits[s.label(*cell)];
        }
      }
      std::map<int, double> freq;
      for (int id : s.boundary_components(c.phase))
        freq[id] = static_cast<double>(hits[id]) / (static_cast<double>(walks) * steps);
      it = memo->emplace(key, std::move(freq)).first;
    }
    std::vector<double> v;
    for (auto [id, f] : it->second) v.push_back(f);
    if (v.empty()) return false;
    std::sort(v.begin(), v.end());
    const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    auto f = it->second.find(c.id);
    return (f == it->second.end() ? 0.0 : f->second) >= med;
  };
  return p;
}

using PropertyKey = std::tuple<std::uint64_t, int, int, std::string>;

// Memoized property values keyed by (scene hash, phase, component id, name).
// A first evaluation is repeated and compared, catching evaluators that are
// not functions of the component.
class PropertyCache {
 public:
  bool get(const Scene& s, const ComponentRef& c, const ComponentProperty& p) {
    const PropertyKey key{s.hash(), static_cast<int>(c.phase), c.id, p.name};
    if (auto it = values_.find(key); it != values_.end()) {
      ++hits_;
      return it->second;
    }
    const bool a = p.evaluate(s, c);
    const bool b = p.evaluate(s, c);
    if (a != b) throw InvariantError("property-component-constant", p.name);
    values_.emplace(key, a);
    return a;
  }
  std::size_t size() const { return values_.size(); }
  std::size_t hits() const { return hits_; }

 private:
  std::map<PropertyKey, bool> values_;
  std::size_t hits_ = 0;
};

// ---------------------------------------------------------------------------
// Pivotal scans.

struct PivotalOccupied {
  int z = -1;
  Point point;
  bool eligible = false;  // no atom centered in B(z, delta)
  int samples = 0;
  int flips = 0;
  double fraction = 0.0;
  bool pivotal = false;
};

// Summary of the occupied component of the origin after inserting a ball,
// from the base scene's labels: the new ball merges every component whose
// balls it meets.
inline std::optional<ComponentSummary> inserted_origin_summary(const Scene& s, int origin_id, const Point& x,
                                                                double radius) {
  std::vector<int> merged;
  s.atom_index().for_each_within(x, radius + s.max_atom_radius(), [&](int i, double d) {
    if (d <= radius + s.measure()[static_cast<std::size_t>(i)].radius) {
      const int id = s.atom_component(i);
      if (id >= 0) merged.push_back(id);
    }
  });
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  // Labels follow the ball graph, so a ball missing every ball of C_O(0)
  // leaves it unchanged.
  if (!std::binary_search(merged.begin(), merged.end(), origin_id)) return std::nullopt;
  ComponentSummary out;
  for (int id : merged) {
    const auto& c = s.component(Phase::Occupied, id);
    out.boundary = out.boundary || c.boundary;
    out.cells += c.cells;
    out.volume += c.volume;
  }
  s.grid().for_each_in_ball(x, radius, [&](CellId c) {
    if (s.phase(c) != Phase::Vacant) return;
    ++out.cells;
    out.volume += s.grid().cell_volume(c);
    if (s.boundary_cell(c)) out.boundary = true;
  });
  return out;
}

// For each Z-atom z with no atom of the scene centered in B(z, delta):
// insert `samples` balls at uniform points of B(z, delta) with law radii
// (capped at radius_cap) and count flips of the property on C_O(0).
inline std::vector<PivotalOccupied> pivotal_scan_occupied(const Scene& s, const ComponentProperty& prop,
                                                          const PointMeasure& Z, double delta, int samples,
                                                          const Rng& rng, std::optional<double> radius_cap = {},
                                                          PropertyCache* cache = nullptr,
                                                          bool force_rebuild = false) {
  if (!(delta > 0.0)) throw InputError("pivotal_scan_occupied: delta must be positive");
  const Space& sp = s.space();
  const auto origin = s.component_of(sp.origin(), Phase::Occupied);
  if (!origin) throw InputError("pivotal_scan_occupied: the origin is not occupied");
  PropertyCache local;
  PropertyCache& pc = cache ? *cache : local;
  const bool base = pc.get(s, *origin, prop);
  const RadiusLaw law = RadiusLaw::parse(s.measure().header().radius_law);
  const double min_r = law.min_radius();
  std::vector<PivotalOccupied> out;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    PivotalOccupied rec;
    rec.z = static_cast<int>(i);
    rec.point = Z[i].point;
    rec.eligible = s.measure().count_in_ball(rec.point, delta) == 0;
    if (rec.eligible) {
      Rng r = rng.derive(i, "pivotal");
      for (int k = 0; k < samples; ++k) {
        const Point x = sp.sample_uniform_ball(rec.point, delta, r);
        double rad = law.sample(r);
        if (radius_cap) rad = std::min(rad, *radius_cap);
        const double label = r.uniform();
        bool value = base;
        if (prop.summary && !force_rebuild) {
          if (auto sm = inserted_origin_summary(s, origin->id, x, rad)) value = prop.summary(*sm);
        } else {
          const Scene t = Scene::build(insert_atom(s.measure(), x, rad, label), s.window(), s.analysis_radius(),
                                       s.resolution(), std::min(min_r, rad));
          const auto c = t.component_of(sp.origin(), Phase::Occupied);
          if (!c) throw InvariantError("insertion-keeps-origin-occupied");
          value = pc.get(t, *c, prop);
        }
        ++rec.samples;
        if (value != base) ++rec.flips;
      }
      rec.fraction = rec.samples ? static_cast<double>(rec.flips) / rec.samples : 0.0;
      rec.pivotal = rec.flips > 0;
    }
    out.push_back(rec);
  }
  return out;
}

struct PivotalVacant {
  int z = -1;
  Point point;
  std::size_t deleted = 0;
  bool flipped = false;
};

// Deleting atoms centered in B(z, Delta) with radius <= radius_cap, then a
// full rebuild: flip of the property on C_V(0).
inline std::vector<PivotalVacant> pivotal_scan_vacant(const Scene& s, const ComponentProperty& prop,
                                                      const PointMeasure& Z, double Delta,
                                                      std::optional<double> radius_cap = {},
                                                      PropertyCache* cache = nullptr) {
  if (!(Delta > 0.0)) throw InputError("pivotal_scan_vacant: Delta must be positive");
  const Space& sp = s.space();
  const auto origin = s.component_of(sp.origin(), Phase::Vacant);
  if (!origin) throw InputError("pivotal_scan_vacant: the origin is not vacant");
  PropertyCache local;
  PropertyCache& pc = cache ? *cache : local;
  const bool base = pc.get(s, *origin, prop);
  const double min_r = RadiusLaw::parse(s.measure().header().radius_law).min_radius();
  std::vector<PivotalVacant> out;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    PivotalVacant rec;
    rec.z = static_cast<int>(i);
    rec.point = Z[i].point;
    const PointMeasure m = delete_in_ball(s.measure(), rec.point, Delta, radius_cap);
    rec.deleted = s.measure().size() - m.size();
    if (rec.deleted > 0) {
      const Scene t = Scene::build(m, s.window(), s.analysis_radius(), s.resolution(), min_r);
      const auto c = t.component_of(sp.origin(), Phase::Vacant);
      if (!c) throw InvariantError("deletion-keeps-origin-vacant");
      rec.flipped = pc.get(t, *c, prop) != base;
    }
    out.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indistinguishability.

struct IndistRow {
  std::uint64_t seed = 0;
  int component_id = -1;
  std::size_t cell_count = 0;
  bool boundary = false;
  bool value = false;
};

struct IndistResult {
  std::vector<IndistRow> rows;
  int seeds = 0;
  int mixed = 0;
  double mixed_rate = 0.0;
  std::vector<std::pair<std::size_t, double>> stratified;  // (min cell count, mixed rate)
  bool underpowered = false;                               // fewer than 100 seeds
};

struct SeededScene {
  std::uint64_t seed = 0;
  const Scene* scene = nullptr;
};

inline IndistResult indistinguishability(const std::vector<SeededScene>& scenes, const ComponentProperty& prop,
                                         Phase phase, const std::vector<std::size_t>& strata = {},
                                         PropertyCache* cache = nullptr) {
  if (!prop.invariant)
    throw InputError("indistinguishability: property '" + prop.name + "' is not isometry-invariant");
  PropertyCache local;
  PropertyCache& pc = cache ? *cache : local;
  IndistResult res;
  res.seeds = static_cast<int>(scenes.size());
  res.underpowered = scenes.size() < 100;
  std::vector<int> mixed_at(strata.size(), 0);
  for (const auto& ss : scenes) {
    const Scene& s = *ss.scene;
    std::vector<IndistRow> seed_rows;
    for (int id : s.boundary_components(phase)) {
      const auto& c = s.component(phase, id);
      seed_rows.push_back({ss.seed, id, c.cells, c.boundary, pc.get(s, c, prop)});
    }
    auto mixed = [&](std::size_t min_cells) {
      int yes = 0, no = 0;
      for (const auto& r : seed_rows) {
        if (r.cell_count < min_cells) continue;
        (r.value ? yes : no)++;
      }
      return yes > 0 && no > 0;
    };
    if (mixed(0)) ++res.mixed;
    for (std::size_t k = 0; k < strata.size(); ++k)
      if (mixed(strata[k])) ++mixed_at[k];
    res.rows.insert(res.rows.end(), seed_rows.begin(), seed_rows.end());
  }
  const double n = std::max(1, res.seeds);
  res.mixed_rate = res.mixed / n;
  for (std::size_t k = 0; k < strata.size(); ++k) res.stratified.emplace_back(strata[k], mixed_at[k] / n);
  return res;
}

inline void write_indist_csv(std::ostream& out, const IndistResult& r) {
  out << "seed,component_id,cell_count,boundary,property_value\n";
  for (const auto& row : r.rows)
    out << row.seed << ',' << row.component_id << ',' << row.cell_count << ',' << (row.boundary ? 1 : 0) << ','
        << (row.value ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Coupled monotonicity.

// Largest angle between two boundary-touching cells of the component: the
// complement of the largest gap between their sorted angles (planar spaces),
// or the maximal pairwise angle over a subsample (E3).
inline double boundary_angular_spread(const Scene& s, Phase p, int id) {
  const auto& g = s.grid();
  const Space& sp = s.space();
  const double La = s.analysis_radius(), h = s.resolution();
  std::vector<Point> dirs;
  std::vector<double> angles;
  for (CellId c = 0; c < static_cast<CellId>(g.size()); ++c) {
    if (s.phase(c) != p || s.label(c) != id) continue;
    const double rho = g.center_radius(c);
    if (rho < La || rho >= La + 1.5 * h) continue;
    const Polar pol = sp.to_polar(g.center(c));
    if (sp.dim() == 2) angles.push_back(pol.phi);
    else dirs.push_back(g.center(c));
  }
  if (sp.dim() == 2) {
    if (angles.size() < 2) return 0.0;
    std::sort(angles.begin(), angles.end());
    double gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
    for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
    return std::min(std::numbers::pi, 2.0 * std::numbers::pi - gap);
  }
  const std::size_t stride = std::max<std::size_t>(1, dirs.size() / 512);
  double best = 0.0;
  for (std::size_t i = 0; i < dirs.size(); i += stride)
    for (std::size_t j = i + stride; j < dirs.size(); j += stride) {
      const auto& a = dirs[i];
      const auto& b = dirs[j];
      const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
      const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
      const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
      best = std::max(best, std::acos(std::clamp(dot / (na * nb), -1.0, 1.0)));
    }
  return best;
}

// Components touching the analysis sphere at two points at least pi/2 apart.
inline int crossing_components(const Scene& s, Phase p) {
  int n = 0;
  for (int id : s.boundary_components(p))
    if (boundary_angular_spread(s, p, id) >= std::numbers::pi / 2) ++n;
  return n;
}

struct MonotoneRecord {
  std::uint64_t replica = 0;
  double L_a = 0.0;
  bool inclusion = true;  // O(lambda1) within O(lambda2), cell by cell
  std::size_t inclusion_failures = 0;
  int crossing1 = 0, crossing2 = 0;
  bool violation = false;
};

// omega2 is a marked sample at lambda2; lambda1 keeps the atoms with label
// <= lambda1/lambda2.
inline MonotoneRecord monotone_pair(const PointMeasure& omega2, double lambda1, double lambda2, double L, double L_a,
                                    double h, Phase phase) {
  if (!(lambda1 > 0.0) || !(lambda1 <= lambda2)) throw InputError("monotonicity needs 0 < lambda1 <= lambda2");
  const double rmin = RadiusLaw::parse(omega2.header().radius_law).min_radius();
  const PointMeasure omega1 = thin_by_label(omega2, lambda1 / lambda2);
  const Scene s1 = Scene::build(omega1, L, L_a, h, rmin);
  const Scene s2 = Scene::build(omega2, L, L_a, h, rmin);
  MonotoneRecord rec;
  rec.L_a = L_a;
  for (CellId c = 0; c < static_cast<CellId>(s1.grid().size()); ++c)
    if (s1.phase(c) == Phase::Occupied && s2.phase(c) != Phase::Occupied) ++rec.inclusion_failures;
  rec.inclusion = rec.inclusion_failures == 0;
  rec.crossing1 = crossing_components(s1, phase);
  rec.crossing2 = crossing_components(s2, phase);
  // Occupied: uniqueness passes upward in lambda; vacant: downward.
  rec.violation = phase == Phase::Occupied ? (rec.crossing1 == 1 && rec.crossing2 != 1)
                                           : (rec.crossing2 == 1 && rec.crossing1 != 1);
  return rec;
}

// ---------------------------------------------------------------------------
// Connectivity decay.

struct DecayPoint {
  double t = 0.0;
  double tau = 0.0, lo = 0.0, hi = 0.0;
  int connected = 0, n = 0;
};

struct DecayResult {
  std::vector<DecayPoint> points;
  double boundary_from_origin = 0.0;  // fraction of seeds with C(0) boundary-contacting
};

inline std::optional<int> component_id_at(const Scene& s, const Point& x, Phase p) {
  auto c = s.component_of(x, p);
  if (!c) return std::nullopt;
  return c->id;
}

// Per seed, x_t lies at distance t from 0 in a direction drawn from the
// seed's stream.
inline DecayResult connectivity_decay(const std::vector<SeededScene>& scenes, Phase phase,
                                      const std::vector<double>& t_grid, std::uint64_t master) {
  DecayResult res;
  for (double t : t_grid) res.points.push_back({t, 0, 0, 0, 0, 0});
  int bnd = 0;
  for (const auto& ss : scenes) {
    const Scene& s = *ss.scene;
    const Space& sp = s.space();
    for (double t : t_grid)
      if (t >= s.analysis_radius()) throw InputError("connectivity_decay: distance grid leaves the analysis region");
    Rng rng = Rng::stream(master, ss.seed, "direction");
    Polar dir;
    dir.phi = 2.0 * std::numbers::pi * rng.uniform();
    if (sp.dim() == 3) dir.theta = std::acos(1.0 - 2.0 * rng.uniform());
    const auto c0 = component_id_at(s, sp.origin(), phase);
    if (c0 && s.component(phase, *c0).boundary) ++bnd;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      dir.rho = t_grid[k];
      const auto ct = component_id_at(s, sp.from_polar(dir), phase);
      ++res.points[k].n;
      if (c0 && ct && *c0 == *ct) ++res.points[k].connected;
    }
  }
  for (auto& p : res.points) {
    p.tau = p.n ? static_cast<double>(p.connected) / p.n : 0.0;
    std::tie(p.lo, p.hi) = stats::wilson(p.connected, p.n);
  }
  res.boundary_from_origin = scenes.empty() ? 0.0 : static_cast<double>(bnd) / static_cast<double>(scenes.size());
  return res;
}

inline void write_decay_csv(std::ostream& out, const DecayResult& r) {
  out << "t,tau_hat,ci_lo,ci_hi,n_seeds\n";
  for (const auto& p : r.points)
    out << detail::format_double(p.t) << ',' << detail::format_double(p.tau) << ',' << detail::format_double(p.lo)
        << ',' << detail::format_double(p.hi) << ',' << p.n << '\n';
}

// ---------------------------------------------------------------------------
// Percolation inside a component.

struct PercolationResult {
  std::vector<double> grid;
  std::vector<char> percolates;
  std::optional<double> lambda_star;
  std::size_t vertices = 0;  // at the top of the grid
  std::size_t edges = 0;
};

// Vertices: atoms of eta (intensity = top of the grid) inside the component,
// present at lambda when label <= lambda / lambda_max. Edges: pairs whose
// phase-intrinsic raster distance is at most 2. A cluster percolates when it
// holds a vertex in B(0, L_a/2) and one at radius >= L_a - 1.
inline PercolationResult percolation_on_component(const Scene& s, Phase phase, int component,
                                                  const std::vector<double>& lambda_grid, const PointMeasure& eta) {
  const auto& comp = s.component(phase, component);
  if (!comp.boundary) throw InputError("percolation_on_component: component is not boundary-contacting");
  if (lambda_grid.empty() || !std::is_sorted(lambda_grid.begin(), lambda_grid.end()) || !(lambda_grid.front() > 0.0))
    throw InputError("percolation_on_component: lambda grid must be positive and increasing");
  const double top = lambda_grid.back();
  const Space& sp = s.space();
  const double La = s.analysis_radius();
  struct Vertex {
    Point p;
    double label;
    CellId cell;
    bool inner, outer;
  };
  std::vector<Vertex> vs;
  for (const auto& a : eta.atoms()) {
    const bool in_phase = phase == Phase::Occupied ? s.occupied_at(a.point) : !s.occupied_at(a.point);
    if (!in_phase) continue;
    const auto cell = s.phase_cell_of(a.point, phase);
    if (!cell || s.label(*cell) != component) continue;
    const double rho = sp.distance_unchecked(sp.origin(), a.point);
    vs.push_back({a.point, a.label, *cell, rho <= La / 2.0, rho >= La - 1.0});
  }
  std::sort(vs.begin(), vs.end(), [](const Vertex& a, const Vertex& b) { return a.label < b.label; });
  PercolationResult res;
  res.grid = lambda_grid;
  res.vertices = vs.size();
  std::vector<Point> pts;
  for (const auto& v : vs) pts.push_back(v.p);
  const PointIndex index(sp, pts, 2.0);
  std::vector<std::vector<int>> nbr(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    std::vector<int> close;
    index.for_each_within(vs[i].p, 2.0, [&](int j, double) {
      if (static_cast<std::size_t>(j) > i) close.push_back(j);
    });
    if (close.empty()) continue;
    const auto dist = s.distances_from({vs[i].cell}, 2.0 + 2.0 * s.resolution());
    for (int j : close)
      if (dist[static_cast<std::size_t>(vs[static_cast<std::size_t>(j)].cell)] <= 2.0) {
        nbr[i].push_back(j);
        nbr[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
        ++res.edges;
      }
  }
  UnionFind uf(vs.size());
  std::vector<char> inner(vs.size()), outer(vs.size()), active(vs.size(), 0);
  bool perc = false;
  std::size_t next = 0;
  for (double lam : lambda_grid) {
    const double cut = lam / top;
    for (; next < vs.size() && vs[next].label <= cut; ++next) {
      active[next] = 1;
      inner[next] = vs[next].inner;
      outer[next] = vs[next].outer;
      for (int j : nbr[next]) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const auto a = uf.find(next), b = uf.find(static_cast<std::size_t>(j));
        if (a == b) continue;
        uf.unite(a, b);
        const auto root = uf.find(a);
        inner[root] = inner[a] || inner[b];
        outer[root] = outer[a] || outer[b];
      }
      const auto root = uf.find(next);
      if (inner[root] && outer[root]) perc = true;
    }
    if (!res.percolates.empty() && res.percolates.back() && !perc)
      throw InvariantError("percolation-monotone-in-lambda");
    res.percolates.push_back(perc ? 1 : 0);
    if (perc && !res.lambda_star) res.lambda_star = lam;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Mass transport on the trifurcation forest.

// |B(p, a) ∩ B(0, R)| for d(0, p) = d in a planar space, by integrating the
// angular share of each geodesic circle around p.
inline double ball_intersection_volume(const Space& sp, double d, double a, double R, int n = 400) {
  if (sp.dim() != 2) throw InputError("ball_intersection_volume: planar spaces only");
  double acc = 0.0;
  const double ds = a / n;
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) * ds;
    double share;
    if (d == 0.0) {
      share = s <= R ? 1.0 : 0.0;
    } else {
      double c;
      if (sp.hyperbolic()) c = (std::cosh(d) * std::cosh(s) - std::cosh(R)) / (std::sinh(d) * std::sinh(s));
      else c = (d * d + s * s - R * R) / (2.0 * d * s);
      share = c >= 1.0 ? 0.0 : c <= -1.0 ? 1.0 : std::acos(c) / std::numbers::pi;
    }
    acc += share * sp.sphere_measure(s) * ds;
  }
  return acc;
}

struct TransportBalance {
  double out_origin = 0.0, in_origin = 0.0;  // edges leaving / entering vertices in B(0,1)
  double out_avg = 0.0, in_avg = 0.0;        // same, averaged over B(x,1), x uniform in B(0, anchor_radius)
};

// Unit mass along every oriented edge (trifurcation to its chosen neighbour).
inline TransportBalance transport_balance(const Space& sp, const TrifurcationForest& f, double anchor_radius) {
  TransportBalance b;
  const Point o = sp.origin();
  const double vol = sp.ball_volume(anchor_radius);
  std::vector<double> share(f.size());
  for (std::size_t v = 0; v < f.size(); ++v)
    share[v] = ball_intersection_volume(sp, sp.distance_unchecked(o, f.vertices[v].point), 1.0, anchor_radius) / vol;
  for (const auto& e : f.oriented) {
    const auto& a = f.vertices[static_cast<std::size_t>(e.from)].point;
    const auto& c = f.vertices[static_cast<std::size_t>(e.to)].point;
    if (sp.distance_unchecked(o, a) <= 1.0) b.out_origin += 1.0;
    if (sp.distance_unchecked(o, c) <= 1.0) b.in_origin += 1.0;
    b.out_avg += share[static_cast<std::size_t>(e.from)];
    b.in_avg += share[static_cast<std::size_t>(e.to)];
  }
  return b;
}

// ---------------------------------------------------------------------------
// Vacant-count bound.

struct VacantCount {
  std::size_t k = 0;      // atoms centered in B(0, 2)
  std::size_t count = 0;  // vacant components of B(0, 1)
};

inline VacantCount vacant_count(const Scene& s) {
  Scratch scratch;
  const Point o = s.space().origin();
  return {s.measure().count_in_ball(o, 2.0), s.count_components_in_ball(o, 1.0, Phase::Vacant, scratch)};
}

struct BoundFit {
  double C = 0.0;
  std::size_t fitted = 0, tested = 0, violations = 0;
};

// C = max count / max(k,1)^2 over the first half; violations on the rest.
inline BoundFit fit_count_bound(const std::vector<VacantCount>& xs) {
  BoundFit f;
  const std::size_t half = xs.size() / 2;
  auto scale = [](std::size_t k) { return static_cast<double>(std::max<std::size_t>(k, 1) * std::max<std::size_t>(k, 1)); };
  for (std::size_t i = 0; i < half; ++i) f.C = std::max(f.C, static_cast<double>(xs[i].count) / scale(xs[i].k));
  f.fitted = half;
  for (std::size_t i = half; i < xs.size(); ++i) {
    ++f.tested;
    if (static_cast<double>(xs[i].count) > f.C * scale(xs[i].k)) ++f.violations;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Flows on the labeled ball graph.

struct TransienceRecord {
  std::size_t balls = 0;
  std::size_t tree_edges = 0;
  std::size_t backbone = 0;
  std::size_t roots = 0;
  double max_e1 = 0.0;
  double max_energy = 0.0;
  double max_kirchhoff = 0.0;
  double incoming = 0.0;
};

// Balls centered in B(0, L_a); edges between intersecting balls labeled by
// the hash of their atom labels; the minimal spanning forest. Attachments are
// balls reaching the analysis sphere.
struct BallTree {
  std::vector<int> atoms;  // tree vertex -> atom index
  Tree tree;
  std::vector<char> attachment;
  std::size_t edges = 0;
};

inline BallTree ball_tree(const Scene& s) {
  const Space& sp = s.space();
  const auto& m = s.measure();
  const double La = s.analysis_radius();
  BallTree bt;
  std::vector<int> local(m.size(), -1);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (sp.distance_unchecked(sp.origin(), m[i].point) < La) {
      local[i] = static_cast<int>(bt.atoms.size());
      bt.atoms.push_back(static_cast<int>(i));
    }
  std::vector<LabeledEdge> edges;
  for (auto [a, b] : s.ball_edges()) {
    const int u = local[static_cast<std::size_t>(a)], v = local[static_cast<std::size_t>(b)];
    if (u < 0 || v < 0) continue;
    edges.push_back({u, v, label_to_unit(edge_label(m[static_cast<std::size_t>(a)].label, m[static_cast<std::size_t>(b)].label))});
  }
  const auto msf = minimal_spanning_forest(bt.atoms.size(), edges);
  bt.edges = msf.size();
  bt.tree = Tree::from_edges(bt.atoms.size(), msf);
  bt.attachment.assign(bt.atoms.size(), 0);
  for (std::size_t i = 0; i < bt.atoms.size(); ++i) {
    const auto& a = m[static_cast<std::size_t>(bt.atoms[i])];
    bt.attachment[i] = sp.distance_unchecked(sp.origin(), a.point) + a.radius >= La;
  }
  return bt;
}

// Walk graph on the ball tree, positioned at the ball centers; attachment
// balls are incomplete.
inline WalkGraph ball_walk_graph(const Scene& s, const BallTree& bt) {
  WalkGraph g = WalkGraph::from_tree(bt.tree, bt.attachment);
  g.space = s.space();
  for (int a : bt.atoms) g.points.push_back(s.measure()[static_cast<std::size_t>(a)].point);
  return g;
}

// Backbone of the ball tree and unit flows from every backbone vertex with
// D >= 3.
inline TransienceRecord transience(const Scene& s, std::vector<FlowAssignment>* flows_out = nullptr) {
  const BallTree bt = ball_tree(s);
  const Tree& t = bt.tree;
  const auto& att = bt.attachment;
  const Backbone bb = backbone(t, att);
  TransienceRecord rec;
  rec.balls = bt.atoms.size();
  rec.tree_edges = bt.edges;
  rec.backbone = bb.size();
  const auto flows = trifurcation_flows(bb);
  rec.roots = flows.size();
  for (const auto& f : flows) {
    rec.max_e1 = std::max(rec.max_e1, f.e1);
    rec.max_energy = std::max(rec.max_energy, f.energy);
    rec.max_kirchhoff = std::max(rec.max_kirchhoff, f.kirchhoff_defect);
  }
  rec.incoming = incoming_mass(bb, flows);
  if (flows_out) *flows_out = flows;
  return rec;
}

}  // namespace bperc
