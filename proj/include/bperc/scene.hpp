#pragma once

// A realized Boolean model in a window B(0, L): the exact ball graph of the
// occupied set, a raster of both phases, component labelings, and the
// set-level queries built on them (local components, component counts in
// balls, intrinsic distances).
//
// Occupied connectivity on the raster: two Full-adjacent occupied cells are
// linked when some ball covers both centers; intersecting balls that share no
// covered cell get one explicit bridge link near their lens. With this rule
// the raster partition of ball centers equals the ball-graph partition.
// Vacant connectivity uses Face adjacency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/geometry.hpp"
#include "bperc/grid.hpp"
#include "bperc/process.hpp"
#include "bperc/spatial.hpp"
#include "bperc/union_find.hpp"

namespace bperc {

enum class Phase : std::uint8_t { Vacant = 0, Occupied = 1, Outside = 2 };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Vacant: return "vacant";
    case Phase::Occupied: return "occupied";
    case Phase::Outside: return "outside";
  }
  return "?";
}

inline Phase parse_phase(std::string_view s) {
  if (s == "occupied" || s == "O") return Phase::Occupied;
  if (s == "vacant" || s == "V") return Phase::Vacant;
  throw InputError("unknown phase '" + std::string(s) + "'");
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct ComponentRef {
  Phase phase = Phase::Occupied;
  int id = -1;
  bool boundary = false;     // has a cell at radius >= L_a
  bool in_analysis = false;  // has a cell at radius < L_a
  std::size_t cells = 0;
  double volume = 0.0;
  std::vector<int> balls;  // occupied phase only: atom indices
};

// Per-thread scratch space for traversals over a scene's cells.
class Scratch {
 public:
  void reset(std::size_t n) {
    if (mark_.size() != n) {
      mark_.assign(n, 0);
      epoch_ = 0;
    }
    if (++epoch_ == 0) {
      std::fill(mark_.begin(), mark_.end(), 0);
      epoch_ = 1;
    }
  }
  bool marked(CellId c) const { return mark_[static_cast<std::size_t>(c)] == epoch_; }
  void mark(CellId c) { mark_[static_cast<std::size_t>(c)] = epoch_; }

  std::vector<CellId> queue;

 private:
  std::vector<std::uint32_t> mark_;
  std::uint32_t epoch_ = 0;
};

struct SceneParams {
  double window = 0.0;    // L: raster radius
  double analysis = 0.0;  // L_a
  double resolution = 0.0;
};

class Scene {
 public:
  Scene() = default;

  static Scene build(const PointMeasure& omega, double L, double L_a, double h,
                     std::optional<double> min_radius = std::nullopt) {
    if (!(L_a > 0.0) || !(L_a < L)) throw ConfigError("scene needs 0 < L_a < L");
    double rmin = min_radius.value_or(kInfinity);
    if (!min_radius) {
      try {
        rmin = RadiusLaw::parse(omega.header().radius_law).min_radius();
      } catch (const InputError&) {
      }
      for (const auto& a : omega.atoms()) rmin = std::min(rmin, a.radius);
    }
    if (std::isfinite(rmin) && h > rmin / 4.0 + 1e-12)
      throw ConfigError("resolution h = " + detail::format_double(h) + " is coarser than min_radius/4 = " +
                        detail::format_double(rmin / 4.0));
    Scene s;
    s.space_ = omega.space();
    s.omega_ = omega;
    s.params_ = {L, L_a, h};
    s.grid_ = Grid(s.space_, L, h);
    s.build_ball_graph();
    s.rasterize();
    s.build_bridges();
    s.label_occupied();
    s.label_vacant();
    return s;
  }

  const Space& space() const { return space_; }
  const Grid& grid() const { return grid_; }
  const PointMeasure& measure() const { return omega_; }
  const SceneParams& params() const { return params_; }
  double window() const { return params_.window; }
  double analysis_radius() const { return params_.analysis; }
  double resolution() const { return params_.resolution; }

  Phase phase(CellId c) const { return phase_[static_cast<std::size_t>(c)]; }
  int label(CellId c) const { return label_[static_cast<std::size_t>(c)]; }
  bool boundary_cell(CellId c) const { return grid_.center_radius(c) >= params_.analysis; }
  bool analysis_cell(CellId c) const { return grid_.center_radius(c) < params_.analysis; }

  // Balls covering the cell center, ascending atom index.
  std::span<const int> cover(CellId c) const {
    const auto i = static_cast<std::size_t>(c);
    return {cover_.data() + cover_offset_[i], cover_offset_[i + 1] - cover_offset_[i]};
  }

  const std::vector<std::pair<int, int>>& ball_edges() const { return ball_edges_; }
  int ball_component(int atom) const { return ball_comp_[static_cast<std::size_t>(atom)]; }
  // Occupied component id of an atom's ball, -1 when its ball covers no cell.
  int atom_component(int atom) const {
    return ball_comp_to_component_[static_cast<std::size_t>(ball_comp_[static_cast<std::size_t>(atom)])];
  }
  double max_atom_radius() const { return max_radius_; }
  const PointIndex& atom_index() const { return atom_index_; }

  const std::vector<ComponentRef>& components(Phase p) const {
    return p == Phase::Occupied ? occupied_ : vacant_;
  }
  const ComponentRef& component(Phase p, int id) const { return components(p)[static_cast<std::size_t>(id)]; }

  // Exact point-in-union-of-balls test.
  bool occupied_at(const Point& x) const {
    bool hit = false;
    atom_index_.for_each_within(x, max_radius_, [&](int i, double d) {
      if (d <= omega_[static_cast<std::size_t>(i)].radius) hit = true;
    });
    return hit;
  }

  std::optional<CellId> cell_of(const Point& x) const {
    auto c = grid_.locate(x);
    if (c && phase(*c) == Phase::Outside) return std::nullopt;
    return c;
  }

  // Cell of phase p representing x: x's own cell, or failing that the nearest
  // Full neighbor of that phase (x near a ball boundary).
  std::optional<CellId> phase_cell_of(const Point& x, Phase p) const {
    auto c = cell_of(x);
    if (!c) return std::nullopt;
    if (phase(*c) == p) return c;
    const Embedded e = space_.embed(x);
    std::optional<CellId> best;
    double best_d = kInfinity;
    grid_.for_each_neighbor(*c, Adjacency::Full, [&](CellId n) {
      if (phase(n) != p) return;
      const double d = space_.chord2(grid_.embedded(n), e);
      if (d < best_d) {
        best_d = d;
        best = n;
      }
    });
    return best;
  }

  std::optional<ComponentRef> component_of(const Point& x, Phase p) const {
    if (p == Phase::Occupied) {
      int comp = -1;
      atom_index_.for_each_within(x, max_radius_, [&](int i, double d) {
        if (d <= omega_[static_cast<std::size_t>(i)].radius && comp < 0) comp = ball_comp_[static_cast<std::size_t>(i)];
      });
      if (comp < 0) return std::nullopt;
      const int id = ball_comp_to_component_[static_cast<std::size_t>(comp)];
      if (id < 0) return std::nullopt;
      return component(p, id);
    }
    if (occupied_at(x)) return std::nullopt;
    auto c = phase_cell_of(x, Phase::Vacant);
    if (!c) return std::nullopt;
    return component(p, label(*c));
  }

  // Calls f(neighbor) for each same-phase raster link of cell c.
  template <class F>
  void for_each_link(CellId c, F&& f) const {
    const Phase p = phase(c);
    if (p == Phase::Vacant) {
      grid_.for_each_neighbor(c, Adjacency::Face, [&](CellId n) {
        if (phase(n) == Phase::Vacant) f(n);
      });
      return;
    }
    if (p != Phase::Occupied) return;
    const auto mine = cover(c);
    grid_.for_each_neighbor(c, Adjacency::Full, [&](CellId n) {
      if (phase(n) != Phase::Occupied) return;
      const auto theirs = cover(n);
      auto a = mine.begin();
      auto b = theirs.begin();
      while (a != mine.end() && b != theirs.end()) {
        if (*a == *b) {
          f(n);
          return;
        }
        if (*a < *b) ++a;
        else ++b;
      }
    });
    if (auto it = bridges_.find(c); it != bridges_.end())
      for (CellId n : it->second) f(n);
  }

  // Connected component of x in S ∩ B(x, r), as sorted cells.
  std::vector<CellId> local_component(const Point& x, double r, Phase p, Scratch& scratch) const {
    std::vector<CellId> out;
    auto start = phase_cell_of(x, p);
    if (!start) return out;
    if (p == Phase::Occupied ? !occupied_at(x) : occupied_at(x)) return out;
    const Embedded ex = space_.embed(x);
    const double lim = space_.chord2_of_distance(r);
    scratch.reset(grid_.size());
    auto allowed = [&](CellId c) { return space_.chord2(grid_.embedded(c), ex) <= lim; };
    if (!allowed(*start)) return out;
    flood(*start, scratch, allowed, [&](CellId c) { out.push_back(c); });
    std::sort(out.begin(), out.end());
    return out;
  }

  // Components of S ∩ B(center, rho) on the raster.
  std::size_t count_components_in_ball(const Point& center, double rho, Phase p, Scratch& scratch) const {
    const Embedded ec = space_.embed(center);
    const double lim = space_.chord2_of_distance(rho);
    auto allowed = [&](CellId c) { return space_.chord2(grid_.embedded(c), ec) <= lim; };
    std::vector<CellId> cells;
    grid_.for_each_in_ball(center, rho, [&](CellId c) {
      if (phase(c) == p) cells.push_back(c);
    });
    scratch.reset(grid_.size());
    std::size_t count = 0;
    for (CellId c : cells) {
      if (scratch.marked(c)) continue;
      ++count;
      flood(c, scratch, allowed, [](CellId) {});
    }
    return count;
  }

  // Breadth-first traversal over links from start, visiting unmarked cells
  // accepted by allowed(); marks what it visits.
  template <class Allowed, class Visit>
  void flood(CellId start, Scratch& scratch, Allowed&& allowed, Visit&& visit) const {
    auto& q = scratch.queue;
    q.clear();
    q.push_back(start);
    scratch.mark(start);
    for (std::size_t head = 0; head < q.size(); ++head) {
      const CellId c = q[head];
      visit(c);
      for_each_link(c, [&](CellId n) {
        if (!scratch.marked(n) && allowed(n)) {
          scratch.mark(n);
          q.push_back(n);
        }
      });
    }
  }

  // Raster-only labeling of a phase by flooding links (no ball graph).
  std::vector<int> flood_labels(Phase p) const {
    std::vector<int> lab(grid_.size(), -1);
    Scratch scratch;
    scratch.reset(grid_.size());
    int next = 0;
    for (CellId c = 0; c < static_cast<CellId>(grid_.size()); ++c) {
      if (phase(c) != p || scratch.marked(c)) continue;
      flood(c, scratch, [](CellId) { return true; }, [&](CellId v) { lab[static_cast<std::size_t>(v)] = next; });
      ++next;
    }
    return lab;
  }

  // Dijkstra over same-phase cells from a set of sources. Besides direct
  // links, two-link hops are relaxed with their straight-line length, which
  // removes most of the grid-metric bias. Distances beyond max_dist are not
  // expanded. Returns the dense distance array (kInfinity where unreached).
  std::vector<double> distances_from(const std::vector<CellId>& sources, double max_dist = kInfinity) const {
    std::vector<double> dist(grid_.size(), kInfinity);
    using Item = std::pair<double, CellId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (CellId s : sources) {
      dist[static_cast<std::size_t>(s)] = 0.0;
      pq.push({0.0, s});
    }
    std::vector<CellId> first;
    while (!pq.empty()) {
      auto [d, c] = pq.top();
      pq.pop();
      if (d > dist[static_cast<std::size_t>(c)] || d > max_dist) continue;
      const Embedded& ec = grid_.embedded(c);
      auto relax = [&](CellId n) {
        const double nd = d + space_.embedded_distance(ec, grid_.embedded(n));
        if (nd < dist[static_cast<std::size_t>(n)]) {
          dist[static_cast<std::size_t>(n)] = nd;
          pq.push({nd, n});
        }
      };
      first.clear();
      for_each_link(c, [&](CellId n) {
        first.push_back(n);
        relax(n);
      });
      for (CellId n1 : first)
        for_each_link(n1, [&](CellId n2) {
          if (n2 != c) relax(n2);
        });
    }
    return dist;
  }

  // Shortest same-phase raster path length between the cells of a and b;
  // kInfinity when they lie in different components.
  double intrinsic_distance(Phase p, const Point& a, const Point& b) const {
    const bool ina = p == Phase::Occupied ? occupied_at(a) : !occupied_at(a);
    const bool inb = p == Phase::Occupied ? occupied_at(b) : !occupied_at(b);
    if (!ina || !inb) throw InputError("intrinsic_distance: point is not in the requested phase");
    auto ca = phase_cell_of(a, p), cb = phase_cell_of(b, p);
    if (!ca || !cb) throw InputError("intrinsic_distance: point outside the raster");
    if (label(*ca) != label(*cb)) return kInfinity;
    if (*ca == *cb) return space_.distance_unchecked(a, b);
    const auto dist = distances_from({*ca});
    const double d = dist[static_cast<std::size_t>(*cb)];
    return std::isfinite(d) ? d : kInfinity;
  }

  // Volume-weighted fraction of occupied cells among cells at radius < r.
  double occupied_fraction(double r) const {
    double occ = 0.0, total = 0.0;
    for (CellId c = 0; c < static_cast<CellId>(grid_.size()); ++c) {
      if (phase(c) == Phase::Outside || grid_.center_radius(c) >= r) continue;
      const double v = grid_.cell_volume(c);
      total += v;
      if (phase(c) == Phase::Occupied) occ += v;
    }
    return total > 0.0 ? occ / total : 0.0;
  }

  // Components of phase p that reach the analysis region.
  std::vector<int> analysis_components(Phase p) const {
    std::vector<int> ids;
    for (const auto& c : components(p))
      if (c.in_analysis) ids.push_back(c.id);
    return ids;
  }

  std::vector<int> boundary_components(Phase p) const {
    std::vector<int> ids;
    for (const auto& c : components(p))
      if (c.in_analysis && c.boundary) ids.push_back(c.id);
    return ids;
  }

  // 64-bit digest of the measure and raster parameters.
  std::uint64_t hash() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(space_.kind()) + 1);
    auto fold = [&](double v) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = mix64(h ^ bits);
    };
    fold(params_.window);
    fold(params_.analysis);
    fold(params_.resolution);
    for (const auto& a : omega_.atoms()) {
      for (double c : a.point.x) fold(c);
      fold(a.radius);
      fold(a.label);
    }
    return h;
  }

  // One JSON object per component of both phases.
  void write_summary_jsonl(std::ostream& out) const {
    for (Phase p : {Phase::Occupied, Phase::Vacant})
      for (const auto& c : components(p)) {
        if (!c.in_analysis) continue;
        out << "{\"phase\":\"" << to_string(p) << "\",\"id\":" << c.id << ",\"cells\":" << c.cells
            << ",\"volume\":" << detail::format_double(c.volume) << ",\"boundary\":" << (c.boundary ? "true" : "false")
            << "}\n";
      }
  }

  // Run-length encoded phases, one raster row (ring / x-y column) per line.
  void write_raster_rle(std::ostream& out) const {
    const auto n = static_cast<CellId>(grid_.size());
    const CellId row = grid_.space().dim() == 3 ? static_cast<CellId>(std::lround(std::cbrt(n))) : 0;
    auto sym = [&](CellId c) { return phase(c) == Phase::Occupied ? 'O' : phase(c) == Phase::Vacant ? 'V' : 'X'; };
    CellId c = 0;
    while (c < n) {
      const int ring = row ? -1 : grid_.ring_of(c);
      CellId end = c;
      while (end < n && (row ? end / row == c / row : grid_.ring_of(end) == ring)) ++end;
      CellId i = c;
      bool firstrun = true;
      while (i < end) {
        CellId j = i;
        while (j < end && sym(j) == sym(i)) ++j;
        out << (firstrun ? "" : " ") << sym(i) << (j - i);
        firstrun = false;
        i = j;
      }
      out << '\n';
      c = end;
    }
  }

 private:
  void build_ball_graph() {
    const auto& atoms = omega_.atoms();
    max_radius_ = omega_.max_radius();
    std::vector<Point> pts;
    pts.reserve(atoms.size());
    for (const auto& a : atoms) pts.push_back(a.point);
    atom_index_ = PointIndex(space_, pts, std::max(0.5, std::min(2.0, 2.0 * max_radius_)));
    UnionFind uf(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      atom_index_.for_each_within(atoms[i].point, atoms[i].radius + max_radius_, [&](int j, double d) {
        if (static_cast<std::size_t>(j) <= i) return;
        if (d <= atoms[i].radius + atoms[static_cast<std::size_t>(j)].radius) {
          ball_edges_.emplace_back(static_cast<int>(i), j);
          uf.unite(i, static_cast<std::size_t>(j));
        }
      });
    }
    std::sort(ball_edges_.begin(), ball_edges_.end());
    ball_comp_ = uf.labels();
  }

  void rasterize() {
    const std::size_t n = grid_.size();
    phase_.assign(n, Phase::Vacant);
    for (CellId c = 0; c < static_cast<CellId>(n); ++c)
      if (!grid_.inside_window(c)) phase_[static_cast<std::size_t>(c)] = Phase::Outside;
    std::vector<std::uint32_t> count(n + 1, 0);
    const auto& atoms = omega_.atoms();
    for (const auto& a : atoms)
      grid_.for_each_in_ball(a.point, a.radius, [&](CellId c) { ++count[static_cast<std::size_t>(c)]; });
    cover_offset_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) cover_offset_[i + 1] = cover_offset_[i] + count[i];
    cover_.assign(cover_offset_[n], 0);
    std::vector<std::uint32_t> fill(cover_offset_.begin(), cover_offset_.end() - 1);
    for (std::size_t i = 0; i < atoms.size(); ++i)
      grid_.for_each_in_ball(atoms[i].point, atoms[i].radius, [&](CellId c) {
        cover_[fill[static_cast<std::size_t>(c)]++] = static_cast<int>(i);
        phase_[static_cast<std::size_t>(c)] = Phase::Occupied;
      });
  }

  bool covers(int atom, CellId c) const {
    const auto& a = omega_[static_cast<std::size_t>(atom)];
    return space_.chord2(grid_.embedded(c), space_.embed(a.point)) <= space_.chord2_of_distance(a.radius);
  }

  void build_bridges() {
    const auto& atoms = omega_.atoms();
    const double h = params_.resolution;
    for (auto [i, j] : ball_edges_) {
      const auto& ai = atoms[static_cast<std::size_t>(i)];
      const auto& aj = atoms[static_cast<std::size_t>(j)];
      const int small = ai.radius <= aj.radius ? i : j;
      const int other = small == i ? j : i;
      bool shared = false;
      grid_.for_each_in_ball(atoms[static_cast<std::size_t>(small)].point, atoms[static_cast<std::size_t>(small)].radius,
                             [&](CellId c) {
                               if (shared) return;
                               const auto cv = cover(c);
                               shared = std::binary_search(cv.begin(), cv.end(), other);
                             });
      if (shared) continue;
      // Point on the axis inside the lens.
      const double d = space_.distance_unchecked(ai.point, aj.point);
      const Point m = d > 0.0 ? space_.geodesic_point(ai.point, aj.point, 0.5 * (d + ai.radius - aj.radius)) : ai.point;
      const Embedded em = space_.embed(m);
      auto nearest = [&](int atom) -> std::optional<CellId> {
        for (double rad = 2.0 * h; rad <= 8.0 * h + 1e-12; rad += 2.0 * h) {
          std::optional<CellId> best;
          double best_d = kInfinity;
          grid_.for_each_in_ball(m, rad, [&](CellId c) {
            if (!covers(atom, c)) return;
            const double dd = space_.chord2(grid_.embedded(c), em);
            if (dd < best_d) {
              best_d = dd;
              best = c;
            }
          });
          if (best) return best;
        }
        return std::nullopt;
      };
      auto ci = nearest(i), cj = nearest(j);
      if (!ci || !cj) continue;  // lens outside the raster
      if (*ci == *cj) continue;
      bridges_[*ci].push_back(*cj);
      bridges_[*cj].push_back(*ci);
    }
    for (auto& [c, v] : bridges_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  void finish_component(ComponentRef& comp, CellId c) {
    ++comp.cells;
    comp.volume += grid_.cell_volume(c);
    if (boundary_cell(c)) comp.boundary = true;
    else comp.in_analysis = true;
  }

  void label_occupied() {
    const std::size_t n = grid_.size();
    label_.assign(n, -1);
    ball_comp_to_component_.assign(ball_comp_.empty() ? 0 : static_cast<std::size_t>(*std::max_element(ball_comp_.begin(), ball_comp_.end()) + 1), -1);
    for (CellId c = 0; c < static_cast<CellId>(n); ++c) {
      if (phase(c) != Phase::Occupied) continue;
      const int bc = ball_comp_[static_cast<std::size_t>(cover(c).front())];
      int& id = ball_comp_to_component_[static_cast<std::size_t>(bc)];
      if (id < 0) {
        id = static_cast<int>(occupied_.size());
        ComponentRef comp;
        comp.phase = Phase::Occupied;
        comp.id = id;
        occupied_.push_back(comp);
      }
      label_[static_cast<std::size_t>(c)] = id;
      finish_component(occupied_[static_cast<std::size_t>(id)], c);
    }
    for (std::size_t i = 0; i < ball_comp_.size(); ++i) {
      const int id = ball_comp_to_component_[static_cast<std::size_t>(ball_comp_[i])];
      if (id >= 0) occupied_[static_cast<std::size_t>(id)].balls.push_back(static_cast<int>(i));
    }
  }

  void label_vacant() {
    Scratch scratch;
    scratch.reset(grid_.size());
    for (CellId c = 0; c < static_cast<CellId>(grid_.size()); ++c) {
      if (phase(c) != Phase::Vacant || scratch.marked(c)) continue;
      ComponentRef comp;
      comp.phase = Phase::Vacant;
      comp.id = static_cast<int>(vacant_.size());
      flood(c, scratch, [](CellId) { return true; }, [&](CellId v) {
        label_[static_cast<std::size_t>(v)] = comp.id;
        finish_component(comp, v);
      });
      vacant_.push_back(std::move(comp));
    }
  }

  Space space_{};
  PointMeasure omega_;
  SceneParams params_;
  Grid grid_;
  double max_radius_ = 0.0;
  PointIndex atom_index_;
  std::vector<std::pair<int, int>> ball_edges_;
  std::vector<int> ball_comp_;
  std::vector<int> ball_comp_to_component_;
  std::vector<Phase> phase_;
  std::vector<std::uint32_t> cover_offset_;
  std::vector<int> cover_;
  std::unordered_map<CellId, std::vector<CellId>> bridges_;
  std::vector<int> label_;
  std::vector<ComponentRef> occupied_;
  std::vector<ComponentRef> vacant_;
};

}  // namespace bperc
