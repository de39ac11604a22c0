#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "bperc/forest.hpp"

using namespace bperc;

namespace {

Atom ball(double x, double y, double r = 1.0, double label = 0.5) { return {{x, y}, r, label}; }

PointMeasure measure(SpaceKind k, std::vector<Atom> atoms) {
  return PointMeasure({k, 8.0, 0.0, 1.0, 0, "constant 1"}, std::move(atoms));
}

// Hub of radius 1.5 at c with `arms` chains of unit balls heading outwards.
void add_tripod(std::vector<Atom>& atoms, double cx, double cy, int arms, double length, double phase0 = 0.0) {
  atoms.push_back(ball(cx, cy, 1.5));
  for (int arm = 0; arm < arms; ++arm) {
    const double a = phase0 + arm * 2.0 * std::numbers::pi / arms;
    for (double t = 2.0; t <= length; t += 1.5) atoms.push_back(ball(cx + t * std::cos(a), cy + t * std::sin(a)));
  }
}

PointMeasure aux(std::vector<Point> pts) {
  std::vector<Atom> atoms;
  double l = 0.1;
  for (auto p : pts) atoms.push_back({p, 1.0, l += 0.1});
  return PointMeasure({SpaceKind::Euclidean2, 8.0, 0.0, 1.0, 0, "constant 1"}, atoms);
}

// Brute-force cycle rule: while a cycle exists, drop its max-label edge.
std::vector<LabeledEdge> cycle_rule(std::size_t n, std::vector<LabeledEdge> edges) {
  for (;;) {
    bool removed = false;
    // Find a cycle by DFS over the current edge set.
    std::vector<std::vector<std::pair<int, int>>> adj(n);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      adj[static_cast<std::size_t>(edges[i].u)].push_back({edges[i].v, int(i)});
      adj[static_cast<std::size_t>(edges[i].v)].push_back({edges[i].u, int(i)});
    }
    std::vector<int> parent_edge(n, -2), parent(n, -1), depth(n, 0);
    for (std::size_t s = 0; s < n && !removed; ++s) {
      if (parent_edge[s] != -2) continue;
      parent_edge[s] = -1;
      std::vector<int> stack{int(s)};
      while (!stack.empty() && !removed) {
        const int v = stack.back();
        stack.pop_back();
        for (auto [w, ei] : adj[static_cast<std::size_t>(v)]) {
          if (ei == parent_edge[static_cast<std::size_t>(v)]) continue;
          if (parent_edge[static_cast<std::size_t>(w)] == -2) {
            parent_edge[static_cast<std::size_t>(w)] = ei;
            parent[static_cast<std::size_t>(w)] = v;
            depth[static_cast<std::size_t>(w)] = depth[static_cast<std::size_t>(v)] + 1;
            stack.push_back(w);
            continue;
          }
          // Cycle: edge ei plus tree paths from v and w to their meeting point.
          std::vector<int> cyc{ei};
          int a = v, b = w;
          while (a != b) {
            if (depth[static_cast<std::size_t>(a)] >= depth[static_cast<std::size_t>(b)]) {
              cyc.push_back(parent_edge[static_cast<std::size_t>(a)]);
              a = parent[static_cast<std::size_t>(a)];
            } else {
              cyc.push_back(parent_edge[static_cast<std::size_t>(b)]);
              b = parent[static_cast<std::size_t>(b)];
            }
          }
          int worst = cyc[0];
          for (int e : cyc)
            if (edges[static_cast<std::size_t>(e)].label > edges[static_cast<std::size_t>(worst)].label) worst = e;
          edges.erase(edges.begin() + worst);
          removed = true;
          break;
        }
      }
    }
    if (!removed) return edges;
  }
}

std::set<std::pair<int, int>> edge_set(const std::vector<LabeledEdge>& es) {
  std::set<std::pair<int, int>> s;
  for (const auto& e : es) s.emplace(std::min(e.u, e.v), std::max(e.u, e.v));
  return s;
}

}  // namespace

TEST(FindTrifurcations, EmptyAuxiliary) {
  std::vector<Atom> atoms;
  add_tripod(atoms, 0, 0, 3, 9.0);
  const auto s = Scene::build(measure(SpaceKind::Euclidean2, atoms), 10.0, 7.0, 0.1);
  EXPECT_TRUE(find_trifurcations(s, aux({}), 2.0, Phase::Occupied).empty());
}

TEST(FindTrifurcations, TripodHub) {
  std::vector<Atom> atoms;
  add_tripod(atoms, 0, 0, 3, 9.0);
  const auto s = Scene::build(measure(SpaceKind::Euclidean2, atoms), 10.0, 7.0, 0.1);
  const auto ts = find_trifurcations(s, aux({{0, 0}}), 2.0, Phase::Occupied);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].boundary_branches(), 3);
  // Two arms only: not a trifurcation. Short arms: no unbounded branch.
  std::vector<Atom> two;
  add_tripod(two, 0, 0, 2, 9.0);
  EXPECT_TRUE(find_trifurcations(Scene::build(measure(SpaceKind::Euclidean2, two), 10.0, 7.0, 0.1), aux({{0, 0}}), 2.0,
                                 Phase::Occupied)
                  .empty());
  std::vector<Atom> shortarms;
  add_tripod(shortarms, 0, 0, 3, 4.0);
  EXPECT_TRUE(find_trifurcations(Scene::build(measure(SpaceKind::Euclidean2, shortarms), 10.0, 7.0, 0.1), aux({{0, 0}}),
                                 2.0, Phase::Occupied)
                  .empty());
}

TEST(FindTrifurcations, ClausesAreEnforced) {
  std::vector<Atom> atoms;
  add_tripod(atoms, 0, 0, 3, 9.0);
  const auto s = Scene::build(measure(SpaceKind::Euclidean2, atoms), 10.0, 7.0, 0.1);
  // A second Y point within 2r disqualifies both.
  EXPECT_TRUE(find_trifurcations(s, aux({{0, 0}, {0.5, 3.0}}), 2.0, Phase::Occupied).empty());
  // B(y,1) not inside the phase.
  EXPECT_TRUE(find_trifurcations(s, aux({{0.8, 0.0}}), 2.0, Phase::Occupied).empty());
}

TEST(BuildForest, EdgelessCases) {
  std::vector<Atom> atoms;
  add_tripod(atoms, 0, 0, 3, 9.0);
  const auto s = Scene::build(measure(SpaceKind::Euclidean2, atoms), 10.0, 7.0, 0.1);
  auto f = build_forest(s, find_trifurcations(s, aux({{0, 0}}), 2.0, Phase::Occupied), Phase::Occupied);
  EXPECT_TRUE(f.edges.empty());
  EXPECT_FALSE(f.interior_complete[0]);
  EXPECT_TRUE(build_forest(s, {}, Phase::Occupied).edges.empty());
}

TEST(BuildForest, TwoHubsShareOneEdge) {
  // Two tripods joined hub to hub along the x axis.
  std::vector<Atom> atoms;
  atoms.push_back(ball(-3.0, 0, 1.5));
  atoms.push_back(ball(3.0, 0, 1.5));
  for (double x = -1.5; x <= 1.5; x += 1.5) atoms.push_back(ball(x, 0));
  for (double sgn : {-1.0, 1.0})
    for (double a : {2.0 * std::numbers::pi / 3.0, -2.0 * std::numbers::pi / 3.0}) {
      const double ax = sgn < 0 ? a : std::numbers::pi - a;
      for (double t = 2.0; t <= 9.0; t += 1.5) atoms.push_back(ball(sgn * 3.0 + t * std::cos(ax), t * std::sin(ax)));
    }
  const auto s = Scene::build(measure(SpaceKind::Euclidean2, atoms), 11.0, 8.0, 0.1);
  const auto ts = find_trifurcations(s, aux({{-3.0, 0}, {3.0, 0}}), 2.0, Phase::Occupied);
  ASSERT_EQ(ts.size(), 2u);
  const auto f = build_forest(s, ts, Phase::Occupied);
  ASSERT_EQ(f.edges.size(), 1u);
  EXPECT_EQ(f.oriented.size(), 2u);
  const auto c = check_forest(f);
  EXPECT_TRUE(c.acyclic && c.one_out_edge_per_branch && c.branch_exchange && c.degree_bounded);
}

TEST(MinimalSpanningForest, Examples) {
  const auto tri = minimal_spanning_forest(3, {{0, 1, 0.2}, {1, 2, 0.5}, {0, 2, 0.9}});
  EXPECT_EQ(edge_set(tri), (std::set<std::pair<int, int>>{{0, 1}, {1, 2}}));
  const std::vector<LabeledEdge> path{{0, 1, 0.7}, {1, 2, 0.1}, {2, 3, 0.4}};
  EXPECT_EQ(edge_set(minimal_spanning_forest(4, path)), edge_set(path));
  EXPECT_THROW(minimal_spanning_forest(3, {{0, 1, 0.5}, {1, 2, 0.5}}), InputError);
}

TEST(MinimalSpanningForest, MatchesCycleRule) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng = Rng::stream(seed, 0, "msf");
    const std::size_t n = 5 + rng.below(56);
    std::vector<LabeledEdge> edges;
    const double p = 3.0 / static_cast<double>(n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (rng.uniform() < p) edges.push_back({int(u), int(v), rng.uniform()});
    const auto msf = minimal_spanning_forest(n, edges);
    EXPECT_EQ(edge_set(msf), edge_set(cycle_rule(n, edges))) << "seed " << seed;
    UnionFind a(n), b(n);
    for (const auto& e : edges) a.unite(std::size_t(e.u), std::size_t(e.v));
    for (const auto& e : msf) b.unite(std::size_t(e.u), std::size_t(e.v));
    EXPECT_EQ(a.labels(), b.labels());
  }
}

TEST(Backbone, Examples) {
  // Path 0-1-2-3 with both ends attached.
  const auto path = Tree::from_edges(4, {{0, 1, 0.1}, {1, 2, 0.2}, {2, 3, 0.3}});
  EXPECT_EQ(backbone(path, {1, 0, 0, 1}).size(), 4u);
  // Star with one attached leaf.
  const auto star = Tree::from_edges(4, {{0, 1, 0.1}, {0, 2, 0.2}, {0, 3, 0.3}});
  EXPECT_EQ(backbone(star, {0, 1, 0, 0}).size(), 0u);
}

TEST(Backbone, MatchesPathMembership) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng::stream(seed, 0, "backbone");
    const std::size_t n = 40;
    std::vector<LabeledEdge> edges;
    for (std::size_t v = 1; v < n; ++v) edges.push_back({int(rng.below(v)), int(v), double(v)});
    const Tree t = Tree::from_edges(n, edges);
    std::vector<char> att(n, 0);
    std::vector<int> atts;
    while (atts.size() < 5) {
      const int v = int(rng.below(n));
      if (!att[std::size_t(v)]) {
        att[std::size_t(v)] = 1;
        atts.push_back(v);
      }
    }
    // Oracle: v is kept iff it lies on the tree path between two attachments.
    auto path = [&](int a, int b) {
      std::vector<int> parent(n, -1);
      std::vector<int> stack{a};
      parent[std::size_t(a)] = a;
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : t.adj[std::size_t(v)])
          if (parent[std::size_t(w)] < 0) {
            parent[std::size_t(w)] = v;
            stack.push_back(w);
          }
      }
      std::vector<int> p{b};
      while (p.back() != a) p.push_back(parent[std::size_t(p.back())]);
      return p;
    };
    std::vector<char> expect(n, 0);
    for (std::size_t i = 0; i < atts.size(); ++i)
      for (std::size_t j = i + 1; j < atts.size(); ++j)
        for (int v : path(atts[i], atts[j])) expect[std::size_t(v)] = 1;
    EXPECT_EQ(backbone(t, att).member, expect) << "seed " << seed;
  }
}

TEST(UnitFlow, RegularTree) {
  // Attached leaves have D = 2, so generation N falls into E_2.
  std::vector<double> e1;
  for (int depth = 1; depth <= 14; ++depth) {
    auto [t, att] = regular_tree(3, depth);
    const auto b = backbone(t, att);
    const auto f = unit_flow(b, 0);
    EXPECT_LT(f.kirchhoff_defect, 1e-12);
    EXPECT_NEAR(f.e1, 1.0 + 2.0 / 3.0 * (1.0 - std::pow(2.0, 1 - depth)), 1e-12);
    EXPECT_NEAR(f.e2, std::pow(2.0, 1 - depth) / 3.0, 1e-12);
    EXPECT_NEAR(f.energy, f.e1 + f.e2, 1e-10);
    for (auto [v, th] : f.theta) {
      if (v >= 1 && v <= 3) {
        EXPECT_DOUBLE_EQ(th, 1.0 / 3.0);
      } else if (v >= 4 && v <= 9) {
        EXPECT_DOUBLE_EQ(th, 1.0 / 6.0);
      }
    }
    e1.push_back(f.e1);
  }
  // Geometric tail: 2 E_1(N) - E_1(N-1) is the infinite-tree value.
  for (std::size_t i = 1; i < e1.size(); ++i) EXPECT_NEAR(2.0 * e1[i] - e1[i - 1], 5.0 / 3.0, 1e-12);
}

TEST(UnitFlow, SingleEdgeAndErrors) {
  // y - x with x attached; y counts its single branch, so D_y = 1.
  const auto t = Tree::from_edges(2, {{0, 1, 0.5}});
  const auto b = backbone(t, {1, 1});
  const auto f = unit_flow(b, 0);
  for (auto [v, th] : f.theta) EXPECT_DOUBLE_EQ(th, v == 0 ? 1.0 : 0.5);
  EXPECT_LT(f.kirchhoff_defect, 1e-15);
  // Root off the backbone.
  EXPECT_THROW(unit_flow(backbone(Tree::from_edges(3, {{0, 1, 0.1}, {1, 2, 0.2}}), {1, 0, 0}), 2), InputError);
}

TEST(IncomingMass, TwoNeighbouringTrifurcations) {
  // a - x - b, where a and b each have two further attached leaves: D_a = D_b = 3.
  const auto t = Tree::from_edges(7, {{0, 1, 0.1}, {1, 2, 0.2}, {0, 3, 0.3}, {0, 4, 0.4}, {2, 5, 0.5}, {2, 6, 0.6}});
  const auto b = backbone(t, {0, 0, 0, 1, 1, 1, 1});
  EXPECT_EQ(b.D(1), 2);
  std::vector<FlowAssignment> flows{unit_flow(b, 0), unit_flow(b, 2)};
  // Leaves 3..6 have D = 2 as well; the max is at x = 1 with 2 (1/3)^2.
  EXPECT_NEAR(incoming_mass(b, flows), 2.0 / 9.0, 1e-15);
  EXPECT_LE(incoming_mass(b, {unit_flow(b, 0)}), 1.0 / 9.0 + 1e-15);
}

TEST(EdgeLabel, SymmetricAndDistinct) {
  EXPECT_EQ(edge_label(0.25, 0.75), edge_label(0.75, 0.25));
  EXPECT_NE(edge_label(0.25, 0.75), edge_label(0.25, 0.5));
  const double u = label_to_unit(edge_label(0.1, 0.2));
  EXPECT_GE(u, 0.0);
  EXPECT_LT(u, 1.0);
}
