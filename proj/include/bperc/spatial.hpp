#pragma once

// Neighbor queries over a fixed set of points. Planar spaces bucket points
// into radial bands sorted by azimuth and bound the azimuth window of a
// query ball with the (hyperbolic) law of sines; E3 uses cubic buckets.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "bperc/geometry.hpp"

namespace bperc {

class PointIndex {
 public:
  PointIndex() = default;

  PointIndex(Space space, const std::vector<Point>& pts, double bucket = 1.0)
      : space_(space), bucket_(bucket), emb_(pts.size()) {
    for (std::size_t i = 0; i < pts.size(); ++i) emb_[i] = space.embed(pts[i]);
    if (space.dim() == 3) {
      for (std::size_t i = 0; i < pts.size(); ++i) cubes_[cube_key(pts[i])].push_back(static_cast<int>(i));
      return;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Polar s = space.to_polar(pts[i]);
      const auto b = static_cast<std::size_t>(s.rho / bucket_);
      if (bands_.size() <= b) bands_.resize(b + 1);
      bands_[b].push_back({s.phi, static_cast<int>(i)});
    }
    for (auto& band : bands_) std::sort(band.begin(), band.end());
  }

  std::size_t size() const { return emb_.size(); }

  // Calls f(i, distance) for every point within distance r of p.
  template <class F>
  void for_each_within(const Point& p, double r, F&& f) const {
    const Embedded ep = space_.embed(p);
    const double lim = space_.chord2_of_distance(r);
    auto test = [&](int i) {
      const double c2 = space_.chord2(emb_[static_cast<std::size_t>(i)], ep);
      if (c2 <= lim) f(i, space_.distance_of_chord2(c2));
    };
    if (space_.dim() == 3) {
      const long cx = cell(p.x[0]), cy = cell(p.x[1]), cz = cell(p.x[2]);
      const long span = static_cast<long>(std::ceil(r / bucket_));
      for (long x = cx - span; x <= cx + span; ++x)
        for (long y = cy - span; y <= cy + span; ++y)
          for (long z = cz - span; z <= cz + span; ++z) {
            auto it = cubes_.find(pack(x, y, z));
            if (it == cubes_.end()) continue;
            for (int i : it->second) test(i);
          }
      return;
    }
    const Polar s = space_.to_polar(p);
    const double lo = std::max(0.0, s.rho - r), hi = s.rho + r;
    const auto b_lo = static_cast<std::size_t>(lo / bucket_);
    const auto b_hi = std::min(bands_.size(), static_cast<std::size_t>(hi / bucket_) + 1);
    double half = std::numbers::pi;
    if (s.rho > r) {
      const double ratio = space_.hyperbolic() ? std::sinh(r) / std::sinh(s.rho) : r / s.rho;
      if (ratio < 1.0) half = std::asin(ratio) + 1e-9;
    }
    for (std::size_t b = b_lo; b < b_hi; ++b) {
      const auto& band = bands_[b];
      if (band.empty()) continue;
      if (half >= std::numbers::pi - 1e-9) {
        for (const auto& e : band) test(e.second);
        continue;
      }
      auto scan = [&](double a0, double a1) {
        auto it = std::lower_bound(band.begin(), band.end(), std::pair<double, int>{a0, -1});
        for (; it != band.end() && it->first <= a1; ++it) test(it->second);
      };
      const double a0 = s.phi - half, a1 = s.phi + half;
      constexpr double two_pi = 2.0 * std::numbers::pi;
      if (a0 < 0.0) {
        scan(a0 + two_pi, two_pi);
        scan(0.0, a1);
      } else if (a1 >= two_pi) {
        scan(a0, two_pi);
        scan(0.0, a1 - two_pi);
      } else {
        scan(a0, a1);
      }
    }
  }

 private:
  long cell(double v) const { return static_cast<long>(std::floor(v / bucket_)); }
  static long long pack(long x, long y, long z) {
    return ((static_cast<long long>(x) + (1 << 20)) << 42) | ((static_cast<long long>(y) + (1 << 20)) << 21) |
           (static_cast<long long>(z) + (1 << 20));
  }
  long long cube_key(const Point& p) const { return pack(cell(p.x[0]), cell(p.x[1]), cell(p.x[2])); }

  Space space_{};
  double bucket_ = 1.0;
  std::vector<Embedded> emb_;
  std::vector<std::vector<std::pair<double, int>>> bands_;
  std::unordered_map<long long, std::vector<int>> cubes_;
};

}  // namespace bperc
