#pragma once

// Rasterization of a geodesic ball B(0, R).
//
// Planar spaces use a geodesic polar grid: ring i covers rho in [i h, (i+1) h]
// and is cut into n_i = 4 ceil(2 pi S(rho_i) / 4h) equal angular sectors,
// S(rho) = rho in E2 and sinh(rho) in H2, so every cell is roughly h x h in the
// metric. E3 uses a Cartesian grid of side h. Neighborhoods come in two
// flavors, Face (4 / 6) and Full (8 / 26); angular overlaps are decided with
// exact integer arithmetic so the relation is symmetric.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/geometry.hpp"

namespace bperc {

using CellId = std::int32_t;
inline constexpr CellId kNoCell = -1;

enum class Adjacency { Face, Full };

class Grid {
 public:
  Grid() = default;

  Grid(Space space, double radius, double h) : space_(space), radius_(radius), h_(h) {
    if (!(h > 0.0) || !(radius > 0.0)) throw InputError("grid needs positive radius and resolution");
    if (space.dim() == 2)
      build_polar();
    else
      build_cartesian();
  }

  const Space& space() const { return space_; }
  double radius() const { return radius_; }
  double resolution() const { return h_; }
  std::size_t size() const { return emb_.size(); }

  const Embedded& embedded(CellId c) const { return emb_[static_cast<std::size_t>(c)]; }
  Point center(CellId c) const { return space_.unembed(embedded(c)); }

  // Geodesic distance of the cell center from the origin.
  double center_radius(CellId c) const {
    if (dim3()) {
      const auto& e = embedded(c);
      return std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
    }
    return (ring_of(c) + 0.5) * h_;
  }

  // Metric volume of the cell.
  double cell_volume(CellId c) const {
    if (dim3()) return h_ * h_ * h_;
    return ring_volume_[static_cast<std::size_t>(ring_of(c))];
  }

  bool inside_window(CellId c) const { return !dim3() || center_radius(c) <= radius_ + 0.5 * h_; }

  std::optional<CellId> locate(const Point& p) const {
    if (dim3()) {
      const int n = cube_n_;
      int idx[3];
      for (int k = 0; k < 3; ++k) {
        idx[k] = static_cast<int>(std::floor(p.x[k] / h_)) + n / 2;
        if (idx[k] < 0 || idx[k] >= n) return std::nullopt;
      }
      return cube_id(idx[0], idx[1], idx[2]);
    }
    const Polar s = space_.to_polar(p);
    const auto ring = static_cast<int>(std::floor(s.rho / h_));
    if (ring < 0 || ring >= rings()) return std::nullopt;
    const int n = ring_count_[static_cast<std::size_t>(ring)];
    int j = static_cast<int>(std::floor(s.phi / (2.0 * std::numbers::pi) * n));
    j = std::clamp(j, 0, n - 1);
    return ring_offset_[static_cast<std::size_t>(ring)] + j;
  }

  // Calls f(cell) for every cell whose center lies within distance r of p.
  template <class F>
  void for_each_in_ball(const Point& p, double r, F&& f) const {
    const Embedded ep = space_.embed(p);
    const double lim = space_.chord2_of_distance(r);
    if (dim3()) {
      const int n = cube_n_;
      int lo[3], hi[3];
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::max(0, static_cast<int>(std::floor((p.x[k] - r) / h_)) + n / 2);
        hi[k] = std::min(n - 1, static_cast<int>(std::floor((p.x[k] + r) / h_)) + n / 2);
      }
      for (int x = lo[0]; x <= hi[0]; ++x)
        for (int y = lo[1]; y <= hi[1]; ++y)
          for (int z = lo[2]; z <= hi[2]; ++z) {
            const CellId c = cube_id(x, y, z);
            if (inside_window(c) && space_.chord2(emb_[static_cast<std::size_t>(c)], ep) <= lim) f(c);
          }
      return;
    }
    const Polar s = space_.to_polar(p);
    const int i_lo = std::max(0, static_cast<int>(std::floor((s.rho - r) / h_ - 0.5)));
    const int i_hi = std::min(rings() - 1, static_cast<int>(std::ceil((s.rho + r) / h_ - 0.5)));
    for (int i = i_lo; i <= i_hi; ++i) {
      const double rc = (i + 0.5) * h_;
      const int n = ring_count_[static_cast<std::size_t>(i)];
      const double half = angular_half_width(rc, s.rho, r);
      if (half < 0.0) continue;
      const CellId off = ring_offset_[static_cast<std::size_t>(i)];
      auto test = [&](int j) {
        const CellId c = off + j;
        if (space_.chord2(emb_[static_cast<std::size_t>(c)], ep) <= lim) f(c);
      };
      const double w = 2.0 * std::numbers::pi / n;
      if (half >= std::numbers::pi || 2.0 * half + 4.0 * w >= 2.0 * std::numbers::pi) {
        for (int j = 0; j < n; ++j) test(j);
        continue;
      }
      const int j_lo = static_cast<int>(std::floor((s.phi - half) / w)) - 1;
      const int j_hi = static_cast<int>(std::floor((s.phi + half) / w)) + 1;
      for (int j = j_lo; j <= j_hi; ++j) test(((j % n) + n) % n);
    }
  }

  template <class F>
  void for_each_neighbor(CellId c, Adjacency adj, F&& f) const {
    if (dim3()) {
      cube_neighbors(c, adj, f);
      return;
    }
    const int i = ring_of(c);
    const int n = ring_count_[static_cast<std::size_t>(i)];
    const CellId off = ring_offset_[static_cast<std::size_t>(i)];
    const int j = c - off;
    if (i == 0 && adj == Adjacency::Full) {
      for (int k = 0; k < n; ++k)
        if (k != j) f(off + k);
    } else {
      f(off + (j + 1) % n);
      f(off + (j + n - 1) % n);
    }
    for (int di : {-1, 1}) {
      const int i2 = i + di;
      if (i2 < 0 || i2 >= rings()) continue;
      const auto m = static_cast<std::int64_t>(ring_count_[static_cast<std::size_t>(i2)]);
      const CellId off2 = ring_offset_[static_cast<std::size_t>(i2)];
      // Intervals in units of 1/(n m): A = [j m, (j+1) m], B = [k n, (k+1) n].
      const std::int64_t nn = n;
      const std::int64_t pad = adj == Adjacency::Face ? 0 : std::max<std::int64_t>(nn, m);
      const std::int64_t a_lo = j * m - pad, a_hi = (j + 1) * m + pad;
      const std::int64_t k_lo = floor_div(a_lo, nn) - 1;
      const std::int64_t k_hi = floor_div(a_hi, nn) + 1;
      if (k_hi - k_lo + 1 >= m) {
        for (std::int64_t k = 0; k < m; ++k)
          if (overlaps(k, nn, a_lo, a_hi, m)) f(off2 + static_cast<CellId>(k));
        continue;
      }
      for (std::int64_t k = k_lo; k <= k_hi; ++k)
        if (k * nn < a_hi && (k + 1) * nn > a_lo) f(off2 + static_cast<CellId>(((k % m) + m) % m));
    }
  }

  int rings() const { return static_cast<int>(ring_count_.size()); }
  int ring_of(CellId c) const {
    auto it = std::upper_bound(ring_offset_.begin(), ring_offset_.end(), c);
    return static_cast<int>(it - ring_offset_.begin()) - 1;
  }

 private:
  bool dim3() const { return space_.dim() == 3; }

  static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  // Some shift of B = [k n, (k+1) n] by multiples of n m overlaps (a_lo, a_hi).
  static bool overlaps(std::int64_t k, std::int64_t n, std::int64_t a_lo, std::int64_t a_hi, std::int64_t m) {
    const std::int64_t period = n * m;
    for (std::int64_t s = -1; s <= 1; ++s) {
      const std::int64_t lo = k * n + s * period, hi = (k + 1) * n + s * period;
      if (lo < a_hi && hi > a_lo) return true;
    }
    return false;
  }

  // Largest angular offset at which a point of ring radius rc is within r of
  // a point at radius rp; negative when the ring misses the ball.
  double angular_half_width(double rc, double rp, double r) const {
    if (rp < 1e-12 || rc < 1e-12) return std::numbers::pi;
    double cosd;
    if (space_.hyperbolic())
      cosd = (std::cosh(rc) * std::cosh(rp) - std::cosh(r)) / (std::sinh(rc) * std::sinh(rp));
    else
      cosd = (rc * rc + rp * rp - r * r) / (2.0 * rc * rp);
    if (cosd > 1.0 + 1e-12) return -1.0;
    if (cosd <= -1.0) return std::numbers::pi;
    return std::acos(std::min(1.0, cosd));
  }

  void build_polar() {
    const int nr = static_cast<int>(std::ceil(radius_ / h_ - 1e-9));
    CellId total = 0;
    for (int i = 0; i < nr; ++i) {
      const double mid = (i + 0.5) * h_;
      const double circ = space_.sphere_measure(mid);
      const int n = 4 * std::max(1, static_cast<int>(std::ceil(circ / (4.0 * h_))));
      ring_offset_.push_back(total);
      ring_count_.push_back(n);
      const double vol = space_.ball_volume((i + 1) * h_) - space_.ball_volume(i * h_);
      ring_volume_.push_back(vol / n);
      total += n;
    }
    emb_.resize(static_cast<std::size_t>(total));
    for (int i = 0; i < nr; ++i) {
      const double rc = (i + 0.5) * h_;
      const int n = ring_count_[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j) {
        Polar s;
        s.rho = rc;
        s.phi = (j + 0.5) * 2.0 * std::numbers::pi / n;
        Embedded e;
        if (space_.hyperbolic())
          e = {std::cosh(rc), std::sinh(rc) * std::cos(s.phi), std::sinh(rc) * std::sin(s.phi)};
        else
          e = {rc * std::cos(s.phi), rc * std::sin(s.phi), 0.0};
        emb_[static_cast<std::size_t>(ring_offset_[static_cast<std::size_t>(i)] + j)] = e;
      }
    }
  }

  void build_cartesian() {
    cube_n_ = 2 * static_cast<int>(std::ceil(radius_ / h_ - 1e-9));
    const auto n = static_cast<std::size_t>(cube_n_);
    emb_.resize(n * n * n);
    for (int x = 0; x < cube_n_; ++x)
      for (int y = 0; y < cube_n_; ++y)
        for (int z = 0; z < cube_n_; ++z)
          emb_[static_cast<std::size_t>(cube_id(x, y, z))] = {(x - cube_n_ / 2 + 0.5) * h_,
                                                                (y - cube_n_ / 2 + 0.5) * h_,
                                                                (z - cube_n_ / 2 + 0.5) * h_};
  }

  CellId cube_id(int x, int y, int z) const { return (x * cube_n_ + y) * cube_n_ + z; }

  template <class F>
  void cube_neighbors(CellId c, Adjacency adj, F&& f) const {
    const int n = cube_n_;
    const int z = c % n, y = (c / n) % n, x = c / (n * n);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
          if (manhattan == 0 || (adj == Adjacency::Face && manhattan != 1)) continue;
          const int a = x + dx, b = y + dy, d = z + dz;
          if (a < 0 || b < 0 || d < 0 || a >= n || b >= n || d >= n) continue;
          const CellId nb = cube_id(a, b, d);
          if (inside_window(nb)) f(nb);
        }
  }

  Space space_{};
  double radius_ = 0.0;
  double h_ = 0.0;
  std::vector<Embedded> emb_;
  std::vector<CellId> ring_offset_;
  std::vector<int> ring_count_;
  std::vector<double> ring_volume_;
  int cube_n_ = 0;
};

}  // namespace bperc
