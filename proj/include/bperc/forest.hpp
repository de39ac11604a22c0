#pragma once

// r-trifurcations of a phase, the labeled forest joining each trifurcation to
// the nearest trifurcation in every boundary-contacting branch, and the
// tree machinery behind the energy bounds: minimal spanning forests by label,
// backbones between attachment vertices, and root-to-infinity unit flows.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <ostream>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/rng.hpp"
#include "bperc/scene.hpp"
#include "bperc/spatial.hpp"
#include "bperc/union_find.hpp"

namespace bperc {

struct Branch {
  int id = 0;
  std::size_t cells = 0;
  bool boundary = false;
};

struct Trifurcation {
  int atom = -1;  // index into the auxiliary measure
  Point point;
  double label = 0.0;
  double r = 0.0;
  int component = -1;
  std::vector<CellId> local;  // sorted
  std::vector<Branch> branches;

  int boundary_branches() const {
    return static_cast<int>(std::count_if(branches.begin(), branches.end(), [](const Branch& b) { return b.boundary; }));
  }
};

// Labels (branch ids) of the cells of y's component outside its local
// component; -1 elsewhere. Also fills t.branches when asked.
inline std::vector<int> branch_labels(const Scene& s, Trifurcation& t, Scratch& scratch, bool fill = true) {
  const auto& grid = s.grid();
  std::vector<int> lab(grid.size(), -1);
  scratch.reset(grid.size());
  for (CellId c : t.local) scratch.mark(c);
  if (fill) t.branches.clear();
  int next = 0;
  for (CellId c : t.local) {
    s.for_each_link(c, [&](CellId n) {
      if (scratch.marked(n)) return;
      Branch b;
      b.id = next;
      s.flood(n, scratch, [&](CellId m) { return s.label(m) == t.component; }, [&](CellId m) {
        lab[static_cast<std::size_t>(m)] = next;
        ++b.cells;
        if (s.boundary_cell(m)) b.boundary = true;
      });
      if (fill) t.branches.push_back(b);
      ++next;
    });
  }
  return lab;
}

// Auxiliary points y of Y inside B(0, L_a) with: no other Y point within 2r;
// every raster cell of B(y,1) in the phase; at least three boundary-contacting
// components of C(y) minus C(y,r).
inline std::vector<Trifurcation> find_trifurcations(const Scene& s, const PointMeasure& Y, double r, Phase phase) {
  if (!(r > 0.0)) throw InputError("trifurcation scale must be positive");
  std::vector<Trifurcation> out;
  if (Y.empty()) return out;
  const Space& sp = s.space();
  std::vector<Point> pts;
  for (const auto& a : Y.atoms()) pts.push_back(a.point);
  const PointIndex index(sp, pts, std::max(0.5, 2.0 * r));
  Scratch scratch;
  for (std::size_t i = 0; i < Y.size(); ++i) {
    const Point& y = Y[i].point;
    if (sp.distance_unchecked(sp.origin(), y) >= s.analysis_radius()) continue;
    bool lonely = true;
    index.for_each_within(y, 2.0 * r, [&](int j, double) {
      if (static_cast<std::size_t>(j) != i) lonely = false;
    });
    if (!lonely) continue;
    const bool in_phase = phase == Phase::Occupied ? s.occupied_at(y) : !s.occupied_at(y);
    if (!in_phase) continue;
    bool filled = true;
    s.grid().for_each_in_ball(y, 1.0, [&](CellId c) {
      if (s.phase(c) != phase) filled = false;
    });
    if (!filled) continue;
    auto cell = s.phase_cell_of(y, phase);
    if (!cell) continue;
    const int comp = s.label(*cell);
    if (!s.component(phase, comp).boundary) continue;
    Trifurcation t;
    t.atom = static_cast<int>(i);
    t.point = y;
    t.label = Y[i].label;
    t.r = r;
    t.component = comp;
    t.local = s.local_component(y, r, phase, scratch);
    if (t.local.empty()) continue;
    branch_labels(s, t, scratch);
    if (t.boundary_branches() >= 3) out.push_back(std::move(t));
  }
  return out;
}

struct ForestEdge {
  int a = -1, b = -1;  // a < b
  std::uint64_t label = 0;
  int branch_a = -1;  // branch of a containing b
  int branch_b = -1;  // branch of b containing a
};

struct OrientedEdge {
  int from = -1, to = -1;
  int branch_from = -1;
  int branch_to = -1;
};

struct TrifurcationForest {
  Phase phase = Phase::Occupied;
  std::vector<Trifurcation> vertices;
  std::vector<OrientedEdge> oriented;
  std::vector<ForestEdge> edges;
  std::vector<std::vector<int>> adjacency;
  std::vector<char> interior_complete;

  std::size_t size() const { return vertices.size(); }
  int degree(int v) const { return static_cast<int>(adjacency[static_cast<std::size_t>(v)].size()); }
};

inline std::uint64_t edge_label(double la, double lb) {
  std::uint64_t x, y;
  std::memcpy(&x, &la, sizeof x);
  std::memcpy(&y, &lb, sizeof y);
  if (y < x) std::swap(x, y);
  return mix64(mix64(x) ^ (y + 0x9e3779b97f4a7c15ULL));
}

inline double label_to_unit(std::uint64_t l) { return static_cast<double>(l >> 11) * 0x1.0p-53; }

// Set-to-set distance in the phase between the local components of every
// pair of trifurcations in one component (kInfinity across components).
inline std::vector<std::vector<double>> local_distances(const Scene& s, const std::vector<Trifurcation>& ts) {
  const std::size_t k = ts.size();
  std::vector<std::vector<double>> d(k, std::vector<double>(k, kInfinity));
  for (std::size_t i = 0; i < k; ++i) {
    d[i][i] = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) any |= j != i && ts[j].component == ts[i].component;
    if (!any) continue;
    const auto dist = s.distances_from(ts[i].local);
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i || ts[j].component != ts[i].component) continue;
      double best = kInfinity;
      for (CellId c : ts[j].local) best = std::min(best, dist[static_cast<std::size_t>(c)]);
      d[i][j] = best;
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) d[i][j] = d[j][i] = std::min(d[i][j], d[j][i]);
  return d;
}

// Each trifurcation sends one edge into every boundary-contacting branch that
// holds another trifurcation: to the one whose local component is closest in
// the phase. Distances are compared in quanta of 2h, ties resolved by the
// smaller label.
inline TrifurcationForest build_forest(const Scene& s, std::vector<Trifurcation> ts, Phase phase) {
  TrifurcationForest f;
  f.phase = phase;
  const std::size_t k = ts.size();
  f.adjacency.assign(k, {});
  f.interior_complete.assign(k, 1);
  if (k == 0) return f;
  Scratch scratch;
  std::vector<std::vector<int>> branch_of(k, std::vector<int>(k, -1));
  for (std::size_t i = 0; i < k; ++i) {
    const auto lab = branch_labels(s, ts[i], scratch, false);
    for (std::size_t j = 0; j < k; ++j)
      if (j != i && ts[j].component == ts[i].component)
        branch_of[i][j] = lab[static_cast<std::size_t>(ts[j].local.front())];
  }
  const auto dist = local_distances(s, ts);
  const double quantum = 2.0 * s.resolution();
  std::map<std::pair<int, int>, ForestEdge> undirected;
  for (std::size_t i = 0; i < k; ++i) {
    for (const Branch& b : ts[i].branches) {
      if (!b.boundary) continue;
      int best = -1;
      double best_q = kInfinity;
      for (std::size_t j = 0; j < k; ++j) {
        if (branch_of[i][j] != b.id || !std::isfinite(dist[i][j])) continue;
        const double q = std::floor(dist[i][j] / quantum);
        if (best < 0 || q < best_q || (q == best_q && ts[j].label < ts[static_cast<std::size_t>(best)].label)) {
          best = static_cast<int>(j);
          best_q = q;
        }
      }
      if (best < 0) {
        f.interior_complete[i] = 0;
        continue;
      }
      const auto j = static_cast<std::size_t>(best);
      f.oriented.push_back({static_cast<int>(i), best, b.id, branch_of[j][i]});
      const int a = std::min(static_cast<int>(i), best), c = std::max(static_cast<int>(i), best);
      ForestEdge e{a, c, edge_label(ts[static_cast<std::size_t>(a)].label, ts[static_cast<std::size_t>(c)].label),
                   branch_of[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)],
                   branch_of[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)]};
      undirected.emplace(std::make_pair(a, c), e);
    }
  }
  UnionFind uf(k);
  for (const auto& [key, e] : undirected) {
    if (!uf.unite(static_cast<std::size_t>(e.a), static_cast<std::size_t>(e.b)))
      throw InvariantError("forest-acyclic", "edge " + std::to_string(e.a) + "-" + std::to_string(e.b) + " closes a cycle");
    f.edges.push_back(e);
    f.adjacency[static_cast<std::size_t>(e.a)].push_back(e.b);
    f.adjacency[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  f.vertices = std::move(ts);
  return f;
}

struct ForestCheck {
  bool acyclic = true;
  bool one_out_edge_per_branch = true;  // at most one oriented edge per (vertex, branch)
  bool complete_vertices_full = true;   // interior-complete: exactly one per boundary branch
  bool branch_exchange = true;
  bool degree_bounded = true;  // out-degree <= boundary-contacting branches
};

inline ForestCheck check_forest(const TrifurcationForest& f) {
  ForestCheck c;
  UnionFind uf(f.size());
  for (const auto& e : f.edges)
    if (!uf.unite(static_cast<std::size_t>(e.a), static_cast<std::size_t>(e.b))) c.acyclic = false;
  std::map<std::pair<int, int>, int> per_branch;
  std::vector<int> out(f.size(), 0);
  for (const auto& e : f.oriented) {
    ++per_branch[{e.from, e.branch_from}];
    ++out[static_cast<std::size_t>(e.from)];
    const auto& vf = f.vertices[static_cast<std::size_t>(e.from)];
    const auto& vt = f.vertices[static_cast<std::size_t>(e.to)];
    if (e.branch_from < 0 || e.branch_to < 0 || !vf.branches[static_cast<std::size_t>(e.branch_from)].boundary ||
        !vt.branches[static_cast<std::size_t>(e.branch_to)].boundary)
      c.branch_exchange = false;
  }
  for (const auto& [key, n] : per_branch)
    if (n != 1) c.one_out_edge_per_branch = false;
  for (std::size_t v = 0; v < f.size(); ++v) {
    const int bb = f.vertices[v].boundary_branches();
    if (out[v] > bb) c.degree_bounded = false;
    if (f.interior_complete[v] && out[v] != bb) c.complete_vertices_full = false;
  }
  return c;
}

// "y_id y'_id label branch_y branch_y'"
inline void write_forest_edges(std::ostream& out, const TrifurcationForest& f) {
  for (const auto& e : f.edges) out << e.a << ' ' << e.b << ' ' << e.label << ' ' << e.branch_a << ' ' << e.branch_b << '\n';
}

// ---------------------------------------------------------------------------
// Labeled graphs, spanning forests, backbones, flows.

struct LabeledEdge {
  int u = -1, v = -1;
  double label = 0.0;
  friend bool operator==(const LabeledEdge&, const LabeledEdge&) = default;
};

// Kruskal in increasing label order; equals deleting the maximal-label edge of
// every cycle.
inline std::vector<LabeledEdge> minimal_spanning_forest(std::size_t n, std::vector<LabeledEdge> edges) {
  std::sort(edges.begin(), edges.end(), [](const LabeledEdge& a, const LabeledEdge& b) { return a.label < b.label; });
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i].label == edges[i - 1].label) throw InputError("minimal_spanning_forest: duplicate edge label");
  UnionFind uf(n);
  std::vector<LabeledEdge> kept;
  for (const auto& e : edges)
    if (uf.unite(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v))) kept.push_back(e);
  return kept;
}

struct Tree {
  std::vector<std::vector<int>> adj;

  static Tree from_edges(std::size_t n, const std::vector<LabeledEdge>& edges) {
    Tree t;
    t.adj.assign(n, {});
    for (const auto& e : edges) {
      t.adj[static_cast<std::size_t>(e.u)].push_back(e.v);
      t.adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    for (auto& a : t.adj) std::sort(a.begin(), a.end());
    return t;
  }
  std::size_t size() const { return adj.size(); }
};

struct Backbone {
  std::vector<char> member;
  std::vector<char> attachment;
  std::vector<std::vector<int>> adj;  // restricted to members

  std::size_t size() const { return static_cast<std::size_t>(std::count(member.begin(), member.end(), 1)); }
  int D(int v) const {
    return static_cast<int>(adj[static_cast<std::size_t>(v)].size()) + (attachment[static_cast<std::size_t>(v)] ? 1 : 0);
  }
};

// Union of the tree paths between pairs of attachment vertices: repeatedly
// strip non-attachment leaves, then drop isolated vertices.
inline Backbone backbone(const Tree& t, const std::vector<char>& attachment) {
  const std::size_t n = t.size();
  if (attachment.size() != n) throw InputError("backbone: attachment flags do not match the tree");
  Backbone b;
  b.member.assign(n, 1);
  b.attachment = attachment;
  std::vector<int> deg(n);
  std::vector<int> stack;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = static_cast<int>(t.adj[v].size());
    if (deg[v] <= 1 && !attachment[v]) stack.push_back(static_cast<int>(v));
  }
  while (!stack.empty()) {
    const auto v = static_cast<std::size_t>(stack.back());
    stack.pop_back();
    if (!b.member[v]) continue;
    b.member[v] = 0;
    for (int w : t.adj[v]) {
      const auto u = static_cast<std::size_t>(w);
      if (!b.member[u]) continue;
      if (--deg[u] <= 1 && !attachment[u]) stack.push_back(w);
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    if (b.member[v] && deg[v] == 0) b.member[v] = 0;
  b.adj.assign(n, {});
  for (std::size_t v = 0; v < n; ++v) {
    if (!b.member[v]) continue;
    for (int w : t.adj[v])
      if (b.member[static_cast<std::size_t>(w)]) b.adj[v].push_back(w);
  }
  return b;
}

struct FlowAssignment {
  int root = -1;
  std::vector<std::pair<int, double>> theta;  // (vertex, flow), traversal order
  double energy = 0.0;
  double e1 = 0.0;  // vertices with D >= 3
  double e2 = 0.0;  // vertices with D == 2
  double kirchhoff_defect = 0.0;  // max relative inflow/outflow mismatch
};

// theta(x) = (1/D_y) * prod over interior path vertices z of 1/(D_z - 1),
// D_z = backbone degree plus one continuing branch per attachment.
inline FlowAssignment unit_flow(const Backbone& b, int root) {
  if (root < 0 || static_cast<std::size_t>(root) >= b.member.size() || !b.member[static_cast<std::size_t>(root)])
    throw InputError("unit_flow: root is not on the backbone");
  FlowAssignment f;
  f.root = root;
  std::vector<std::pair<int, int>> stack{{root, -1}};
  std::vector<double> value(b.member.size(), 0.0);
  value[static_cast<std::size_t>(root)] = 1.0;
  while (!stack.empty()) {
    auto [v, parent] = stack.back();
    stack.pop_back();
    const double th = value[static_cast<std::size_t>(v)];
    f.theta.emplace_back(v, th);
    const int D = b.D(v);
    const double share = v == root ? 1.0 / D : th / (D - 1);
    double out = 0.0;
    for (int w : b.adj[static_cast<std::size_t>(v)]) {
      if (w == parent) continue;
      value[static_cast<std::size_t>(w)] = share;
      out += share;
      stack.emplace_back(w, v);
    }
    if (b.attachment[static_cast<std::size_t>(v)]) out += share;
    f.kirchhoff_defect = std::max(f.kirchhoff_defect, std::abs(out - th) / th);
  }
  for (auto [v, th] : f.theta) {
    const double e = th * th;
    f.energy += e;
    if (b.D(v) >= 3) f.e1 += e;
    else f.e2 += e;
  }
  return f;
}

// Max over D == 2 backbone vertices x of the sum over roots y of theta_y(x)^2.
inline double incoming_mass(const Backbone& b, const std::vector<FlowAssignment>& flows) {
  std::vector<double> acc(b.member.size(), 0.0);
  for (const auto& f : flows)
    for (auto [v, th] : f.theta)
      if (v != f.root) acc[static_cast<std::size_t>(v)] += th * th;
  double m = 0.0;
  for (std::size_t v = 0; v < acc.size(); ++v)
    if (b.member[v] && b.D(static_cast<int>(v)) == 2) m = std::max(m, acc[v]);
  return m;
}

// Flows from every backbone vertex with D >= 3.
inline std::vector<FlowAssignment> trifurcation_flows(const Backbone& b) {
  std::vector<FlowAssignment> out;
  for (std::size_t v = 0; v < b.member.size(); ++v)
    if (b.member[v] && b.D(static_cast<int>(v)) >= 3) out.push_back(unit_flow(b, static_cast<int>(v)));
  return out;
}

// "root_id vertex_id theta"
inline void write_flow(std::ostream& out, const FlowAssignment& f) {
  for (auto [v, th] : f.theta) out << f.root << ' ' << v << ' ' << detail::format_double(th) << '\n';
}

// Rooted tree where the root has d children and every other internal vertex
// d - 1. The leaves at the given depth are attachments (D = 2 there).
inline std::pair<Tree, std::vector<char>> regular_tree(int d, int depth) {
  Tree t;
  t.adj.emplace_back();
  std::vector<int> frontier{0};
  for (int level = 1; level <= depth; ++level) {
    std::vector<int> next;
    for (int v : frontier) {
      const int kids = v == 0 ? d : d - 1;
      for (int k = 0; k < kids; ++k) {
        const int w = static_cast<int>(t.adj.size());
        t.adj.emplace_back();
        t.adj[static_cast<std::size_t>(v)].push_back(w);
        t.adj[static_cast<std::size_t>(w)].push_back(v);
        next.push_back(w);
      }
    }
    frontier = std::move(next);
  }
  std::vector<char> att(t.size(), 0);
  for (int v : frontier) att[static_cast<std::size_t>(v)] = 1;
  return {std::move(t), std::move(att)};
}

}  // namespace bperc
