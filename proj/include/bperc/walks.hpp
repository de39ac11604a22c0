#pragma once

// Delayed simple random walks on trifurcation forests (and synthetic trees),
// the two-sided root-biased walk, stationarity and escape diagnostics, and
// the ambient unit-ball walk used for component frequencies.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/forest.hpp"
#include "bperc/geometry.hpp"
#include "bperc/rng.hpp"
#include "bperc/scene.hpp"
#include "bperc/spatial.hpp"
#include "bperc/stats.hpp"

namespace bperc {

// Undirected graph with optional positions. `complete` marks vertices whose
// neighbourhood is fully realized; walks leaving that set are censored.
struct WalkGraph {
  Space space;
  std::vector<std::vector<int>> adj;
  std::vector<Point> points;
  std::vector<char> complete;

  std::size_t size() const { return adj.size(); }
  int degree(int v) const { return static_cast<int>(adj[static_cast<std::size_t>(v)].size()); }
  int weight(int v) const { return degree(v) + 1; }  // c_G(v)

  static WalkGraph from_forest(const Space& sp, const TrifurcationForest& f) {
    WalkGraph g;
    g.space = sp;
    g.adj = f.adjacency;
    for (auto& a : g.adj) std::sort(a.begin(), a.end());
    for (const auto& t : f.vertices) g.points.push_back(t.point);
    g.complete = f.interior_complete;
    return g;
  }

  // Positions are left empty; non-attachment vertices count as complete.
  static WalkGraph from_tree(const Tree& t, const std::vector<char>& boundary = {}) {
    WalkGraph g;
    g.adj = t.adj;
    g.complete.assign(t.size(), 1);
    for (std::size_t v = 0; v < boundary.size() && v < t.size(); ++v) g.complete[v] = boundary[v] ? 0 : 1;
    return g;
  }

  static WalkGraph path(int n) {
    WalkGraph g;
    g.adj.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i + 1 < n; ++i) {
      g.adj[static_cast<std::size_t>(i)].push_back(i + 1);
      g.adj[static_cast<std::size_t>(i + 1)].push_back(i);
    }
    g.complete.assign(static_cast<std::size_t>(n), 1);
    return g;
  }
};

// Stay with probability 1/c, move to each neighbour with probability 1/c.
inline int delayed_step(const WalkGraph& g, int v, Rng& rng) {
  const auto& nb = g.adj[static_cast<std::size_t>(v)];
  const auto k = rng.below(nb.size() + 1);
  return k == nb.size() ? v : nb[k];
}

// Embedded chain of the delayed walk: uniform neighbour, stays only when isolated.
inline int jump_step(const WalkGraph& g, int v, Rng& rng) {
  const auto& nb = g.adj[static_cast<std::size_t>(v)];
  if (nb.empty()) return v;
  return nb[rng.below(nb.size())];
}

struct ForestWalk {
  int k = 0;
  std::vector<int> path;  // w(-k) .. w(k); w(n) = path[k + n]
  std::vector<int> candidates;
  std::vector<int> weights;
  int chosen = -1;
  int exit_forward = -1;   // first n >= 0 with w(n) incomplete, -1 if none
  int exit_backward = -1;  // same for w(-n)

  int at(int n) const { return path[static_cast<std::size_t>(k + n)]; }
};

inline std::vector<int> vertices_within(const WalkGraph& g, const Point& x, double radius) {
  std::vector<int> out;
  for (std::size_t v = 0; v < g.points.size(); ++v)
    if (g.space.distance_unchecked(g.points[v], x) <= radius) out.push_back(static_cast<int>(v));
  return out;
}

inline int pick_weighted(const WalkGraph& g, const std::vector<int>& cands, Rng& rng) {
  long total = 0;
  for (int v : cands) total += g.weight(v);
  auto u = static_cast<long>(rng.below(static_cast<std::uint64_t>(total)));
  for (int v : cands) {
    u -= g.weight(v);
    if (u < 0) return v;
  }
  return cands.back();
}

inline ForestWalk walk_from(const WalkGraph& g, int start, int k, Rng& rng) {
  ForestWalk w;
  w.k = k;
  w.chosen = start;
  w.path.assign(static_cast<std::size_t>(2 * k + 1), start);
  for (int n = 1; n <= k; ++n) w.path[static_cast<std::size_t>(k + n)] = delayed_step(g, w.at(n - 1), rng);
  for (int n = 1; n <= k; ++n) w.path[static_cast<std::size_t>(k - n)] = delayed_step(g, w.at(-(n - 1)), rng);
  for (int n = 0; n <= k; ++n)
    if (!g.complete[static_cast<std::size_t>(w.at(n))]) {
      w.exit_forward = n;
      break;
    }
  for (int n = 0; n <= k; ++n)
    if (!g.complete[static_cast<std::size_t>(w.at(-n))]) {
      w.exit_backward = n;
      break;
    }
  return w;
}

// w(0) among the vertices in B(x,1) with probability proportional to c_G,
// then independent delayed walks forward and backward.
inline std::optional<ForestWalk> two_sided_walk(const WalkGraph& g, const Point& x, int k, Rng& rng) {
  if (k < 0) throw InputError("two_sided_walk: k must be non-negative");
  auto cands = vertices_within(g, x, 1.0);
  if (cands.empty()) return std::nullopt;
  const int v = pick_weighted(g, cands, rng);
  ForestWalk w = walk_from(g, v, k, rng);
  w.candidates = std::move(cands);
  for (int c : w.candidates) w.weights.push_back(g.weight(c));
  return w;
}

// JSON line: {"k":..,"path":[..]}
inline void write_walk_jsonl(std::ostream& out, const ForestWalk& w) {
  out << "{\"k\":" << w.k << ",\"chosen\":" << w.chosen << ",\"path\":[";
  for (std::size_t i = 0; i < w.path.size(); ++i) out << (i ? "," : "") << w.path[i];
  out << "],\"exit_forward\":" << w.exit_forward << ",\"exit_backward\":" << w.exit_backward << "}\n";
}

// ---------------------------------------------------------------------------
// Stationarity.

using Observable = std::function<int(const WalkGraph&, int)>;

inline int degree_observable(const WalkGraph& g, int v) { return g.degree(v); }

struct StationarityOptions {
  int n_max = 10;
  double anchor_radius = 1.0;      // anchors live in B(0, anchor_radius)
  double anchor_intensity = 1.0;   // anchors per unit volume
  int max_weight = 8;              // acceptance bound M >= max c_G over candidate sets
};

using Histogram = std::map<int, long>;

struct StationarityResult {
  int n_max = 0;
  long anchors = 0;   // anchors with a non-empty candidate set
  long accepted = 0;
  long censored = 0;  // accepted walks meeting an incomplete vertex within n_max
  std::vector<Histogram> forward;   // index n: observable at w(n)
  std::vector<Histogram> backward;  // index n: observable at w(-n)
  std::vector<Histogram> forward_censored;  // only observations up to the exit time
  double tv_max = 0.0;       // max over 0 <= m < n <= n_max of TV(w(m), w(n))
  double tv_reversal = 0.0;  // max over n of TV(w(-n), w(n))
  std::vector<std::vector<double>> tv_matrix;
};

inline double histogram_tv(const Histogram& a, const Histogram& b) {
  long na = 0, nb = 0;
  for (auto [k, c] : a) na += c;
  for (auto [k, c] : b) nb += c;
  if (na == 0 || nb == 0) return na == nb ? 0.0 : 1.0;
  std::map<int, std::pair<double, double>> joint;
  for (auto [k, c] : a) joint[k].first = static_cast<double>(c) / static_cast<double>(na);
  for (auto [k, c] : b) joint[k].second = static_cast<double>(c) / static_cast<double>(nb);
  double s = 0.0;
  for (const auto& [k, p] : joint) s += std::abs(p.first - p.second);
  return 0.5 * s;
}

// Anchors form a Poisson process of the given intensity on B(0, anchor_radius)
// restricted to the union of the unit balls around vertices (the only
// anchors with a non-empty candidate set). A configuration with candidate
// weight W is kept with probability W / M, which weights the ensemble by
// sum of c_G over V ∩ B(x,1).
inline void accumulate_stationarity(const WalkGraph& g, const StationarityOptions& opt, const Observable& obs,
                                    Rng rng, StationarityResult& res) {
  const int n_max = opt.n_max;
  if (res.forward.empty()) {
    res.n_max = n_max;
    res.forward.assign(static_cast<std::size_t>(n_max + 1), {});
    res.backward.assign(static_cast<std::size_t>(n_max + 1), {});
    res.forward_censored.assign(static_cast<std::size_t>(n_max + 1), {});
  }
  const Space& sp = g.space;
  const double unit = sp.ball_volume(1.0);
  for (std::size_t v = 0; v < g.points.size(); ++v) {
    const auto n = rng.poisson(opt.anchor_intensity * unit);
    for (std::uint64_t a = 0; a < n; ++a) {
      const Point x = sp.sample_uniform_ball(g.points[v], 1.0, rng);
      if (sp.distance_unchecked(sp.origin(), x) > opt.anchor_radius) continue;
      const auto cands = vertices_within(g, x, 1.0);
      if (cands.empty() || cands.front() != static_cast<int>(v)) continue;  // counted once, by the first vertex
      ++res.anchors;
      int W = 0;
      for (int c : cands) W += g.weight(c);
      if (W > opt.max_weight) throw InvariantError("walk-acceptance-bound", "candidate weight exceeds the bound");
      if (rng.uniform() * opt.max_weight >= W) continue;
      const int start = pick_weighted(g, cands, rng);
      const ForestWalk w = walk_from(g, start, n_max, rng);
      ++res.accepted;
      if (w.exit_forward >= 0 || w.exit_backward >= 0) ++res.censored;
      for (int m = 0; m <= n_max; ++m) {
        ++res.forward[static_cast<std::size_t>(m)][obs(g, w.at(m))];
        ++res.backward[static_cast<std::size_t>(m)][obs(g, w.at(-m))];
        if (w.exit_forward < 0 || m <= w.exit_forward) ++res.forward_censored[static_cast<std::size_t>(m)][obs(g, w.at(m))];
      }
    }
  }
}

inline void finish_stationarity(StationarityResult& res) {
  const auto n = res.forward.size();
  res.tv_matrix.assign(n, std::vector<double>(n, 0.0));
  res.tv_max = res.tv_reversal = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double t = histogram_tv(res.forward[a], res.forward[b]);
      res.tv_matrix[a][b] = res.tv_matrix[b][a] = t;
      res.tv_max = std::max(res.tv_max, t);
    }
    res.tv_reversal = std::max(res.tv_reversal, histogram_tv(res.forward[a], res.backward[a]));
  }
}

inline StationarityResult stationarity_diagnostic(const std::vector<WalkGraph>& ensemble, const StationarityOptions& opt,
                                                  const Observable& obs, const Rng& rng) {
  StationarityResult res;
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    accumulate_stationarity(ensemble[i], opt, obs, rng.derive(i, "stationarity"), res);
  if (res.forward.empty()) {
    res.n_max = opt.n_max;
    res.forward.assign(static_cast<std::size_t>(opt.n_max + 1), {});
    res.backward = res.forward_censored = res.forward;
  }
  finish_stationarity(res);
  return res;
}

// "n,observable,bin,count" rows.
inline void write_stationarity_csv(std::ostream& out, const StationarityResult& r, const std::string& name) {
  out << "n,observable,bin,count\n";
  for (int n = -r.n_max; n <= r.n_max; ++n) {
    const auto& h = n < 0 ? r.backward[static_cast<std::size_t>(-n)] : r.forward[static_cast<std::size_t>(n)];
    for (auto [bin, c] : h) out << n << ',' << name << ',' << bin << ',' << c << '\n';
  }
}

// ---------------------------------------------------------------------------
// Escape.

struct EscapeEstimate {
  long trials = 0;
  long escaped = 0;
  long exited = 0;  // reached an incomplete vertex first
  long capped = 0;  // hit the step cap first
  double p = 0.0;
  double se = 0.0;
  double censoring = 0.0;
};

// After the first move away from v: escape unless the walk revisits v within
// step_cap steps. Reaching an incomplete vertex ends the trial as an escape.
inline EscapeEstimate escape_probability(const WalkGraph& g, int v, long trials, long step_cap, Rng& rng,
                                         bool delayed = false) {
  EscapeEstimate e;
  e.trials = trials;
  if (g.adj[static_cast<std::size_t>(v)].empty()) {
    e.p = 0.0;
    return e;
  }
  for (long t = 0; t < trials; ++t) {
    int x = v;
    while (x == v) x = delayed ? delayed_step(g, x, rng) : jump_step(g, x, rng);
    bool returned = false, exited = false;
    for (long s = 1; s < step_cap; ++s) {
      if (!g.complete[static_cast<std::size_t>(x)]) {
        exited = true;
        break;
      }
      x = delayed ? delayed_step(g, x, rng) : jump_step(g, x, rng);
      if (x == v) {
        returned = true;
        break;
      }
    }
    if (!returned) ++e.escaped;
    if (exited) ++e.exited;
    else if (!returned) ++e.capped;
  }
  e.p = static_cast<double>(e.escaped) / static_cast<double>(trials);
  e.se = std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(trials));
  e.censoring = static_cast<double>(e.exited + e.capped) / static_cast<double>(trials);
  return e;
}

// ---------------------------------------------------------------------------
// Ambient walk and component frequency.

struct AmbientWalk {
  std::vector<Point> points;
  long redraws = 0;
};

// X_0 = 0, X_i uniform in B(X_{i-1}, 1); proposals outside B(0, region) are redrawn.
inline AmbientWalk ambient_walk(const Space& sp, int steps, double region, Rng& rng) {
  if (steps < 0) throw InputError("ambient_walk: steps must be non-negative");
  if (!(region > 0.0)) throw InputError("ambient_walk: region radius must be positive");
  AmbientWalk w;
  w.points.reserve(static_cast<std::size_t>(steps) + 1);
  w.points.push_back(sp.origin());
  for (int i = 0; i < steps; ++i) {
    for (;;) {
      const Point p = sp.sample_uniform_ball(w.points.back(), 1.0, rng);
      if (sp.distance_unchecked(sp.origin(), p) <= region) {
        w.points.push_back(p);
        break;
      }
      ++w.redraws;
    }
  }
  return w;
}

struct FrequencyEstimate {
  double mean = 0.0;
  double se = 0.0;
  int walks = 0;
  int steps = 0;
};

// Fraction of steps X_1..X_n inside the component's cells, averaged over walks
// confined to the analysis region.
inline FrequencyEstimate component_frequency(const Scene& s, Phase phase, int component, int walks, int steps,
                                             const Rng& rng) {
  if (walks <= 0 || steps <= 0) throw InputError("component_frequency: walks and steps must be positive");
  std::vector<double> f;
  for (int i = 0; i < walks; ++i) {
    Rng r = rng.derive(static_cast<std::uint64_t>(i), "frequency");
    const auto w = ambient_walk(s.space(), steps, s.analysis_radius(), r);
    long in = 0;
    for (std::size_t j = 1; j < w.points.size(); ++j) {
      const auto c = s.cell_of(w.points[j]);
      if (c && s.phase(*c) == phase && s.label(*c) == component) ++in;
    }
    f.push_back(static_cast<double>(in) / steps);
  }
  const auto sm = stats::summarize(f);
  return {sm.mean, sm.se, walks, steps};
}

}  // namespace bperc
