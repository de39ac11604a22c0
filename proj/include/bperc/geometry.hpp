#pragma once

// Metric, volume, sampling and isometries of the model spaces
// E^2, E^3 and the hyperbolic plane (Poincare disk, curvature -1).

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>

#include "bperc/errors.hpp"
#include "bperc/rng.hpp"

namespace bperc {

enum class SpaceKind { Euclidean2, Euclidean3, HyperbolicPlane };

inline std::string_view to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::Euclidean2: return "E2";
    case SpaceKind::Euclidean3: return "E3";
    case SpaceKind::HyperbolicPlane: return "H2";
  }
  return "?";
}

inline SpaceKind parse_space_kind(std::string_view s) {
  if (s == "E2" || s == "euclidean2") return SpaceKind::Euclidean2;
  if (s == "E3" || s == "euclidean3") return SpaceKind::Euclidean3;
  if (s == "H2" || s == "hyperbolic") return SpaceKind::HyperbolicPlane;
  throw InputError("unknown space kind '" + std::string(s) + "'");
}

// Chart coordinates. Planar spaces use x[0], x[1]; x[2] stays 0.
struct Point {
  std::array<double, 3> x{0.0, 0.0, 0.0};

  constexpr Point() = default;
  constexpr Point(double a, double b, double c = 0.0) : x{a, b, c} {}

  double operator[](std::size_t i) const { return x[i]; }
  double& operator[](std::size_t i) { return x[i]; }
  friend bool operator==(const Point&, const Point&) = default;
};

// Geodesic polar coordinates about the origin.
struct Polar {
  double rho = 0.0;
  double phi = 0.0;    // azimuth in [0, 2pi)
  double theta = 0.0;  // polar angle from +z (E3 only)
};

// Coordinates in which distances are cheap: Cartesian for Euclidean spaces,
// the hyperboloid (cosh rho, sinh rho cos phi, sinh rho sin phi) for H2.
using Embedded = std::array<double, 3>;

namespace detail {

constexpr double kDiskClamp = 1.0 - 1e-12;

inline std::complex<double> as_complex(const Point& p) { return {p.x[0], p.x[1]}; }
inline Point from_complex(std::complex<double> z) {
  const double r = std::abs(z);
  if (r > kDiskClamp) z *= kDiskClamp / r;
  return {z.real(), z.imag(), 0.0};
}

inline double wrap_angle(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  phi = std::fmod(phi, two_pi);
  if (phi < 0.0) phi += two_pi;
  if (phi >= two_pi) phi = 0.0;
  return phi;
}

// z -> (z + a) / (1 + conj(a) z)
inline std::complex<double> mobius_translate(std::complex<double> z, std::complex<double> a) {
  return (z + a) / (1.0 + std::conj(a) * z);
}

}  // namespace detail

// Orientation-preserving disk automorphism z -> (alpha z + beta)/(conj(beta) z + conj(alpha)),
// optionally preceded by complex conjugation; or a Euclidean rigid motion p -> Q p + t.
class Isometry {
 public:
  using Mat3 = std::array<std::array<double, 3>, 3>;

  static Isometry identity(SpaceKind k) {
    Isometry g;
    g.kind_ = k;
    return g;
  }

  static Isometry euclidean(SpaceKind k, const Mat3& q, const Point& t) {
    Isometry g;
    g.kind_ = k;
    g.q_ = q;
    g.t_ = t;
    return g;
  }

  // z -> e^{i angle} (w + a) / (1 + conj(a) w), w = reflect ? conj(z) : z.
  static Isometry hyperbolic(double angle, std::complex<double> a, bool reflect = false) {
    if (!(std::abs(a) < 1.0)) throw InputError("Mobius center must lie in the open unit disk");
    const double s = std::sqrt(1.0 - std::norm(a));
    const std::complex<double> e = std::polar(1.0, angle / 2.0);
    Isometry g;
    g.kind_ = SpaceKind::HyperbolicPlane;
    g.alpha_ = e / s;
    g.beta_ = e * a / s;
    g.reflect_ = reflect;
    return g;
  }

  SpaceKind kind() const { return kind_; }
  bool reflects() const { return reflect_; }

  Point operator()(const Point& p) const {
    if (kind_ == SpaceKind::HyperbolicPlane) {
      std::complex<double> z = detail::as_complex(p);
      if (reflect_) z = std::conj(z);
      return detail::from_complex((alpha_ * z + beta_) / (std::conj(beta_) * z + std::conj(alpha_)));
    }
    Point r;
    for (int i = 0; i < 3; ++i)
      r.x[i] = q_[i][0] * p.x[0] + q_[i][1] * p.x[1] + q_[i][2] * p.x[2] + t_.x[i];
    return r;
  }

  // (*this) o other
  Isometry compose(const Isometry& other) const {
    if (other.kind_ != kind_) throw InputError("composing isometries of different spaces");
    Isometry g;
    g.kind_ = kind_;
    if (kind_ == SpaceKind::HyperbolicPlane) {
      std::complex<double> a2 = other.alpha_, b2 = other.beta_;
      if (reflect_) {
        a2 = std::conj(a2);
        b2 = std::conj(b2);
      }
      // [[a1 b1][~b1 ~a1]] * [[a2 b2][~b2 ~a2]]
      g.alpha_ = alpha_ * a2 + beta_ * std::conj(b2);
      g.beta_ = alpha_ * b2 + beta_ * std::conj(a2);
      g.reflect_ = reflect_ != other.reflect_;
      return g;
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += q_[i][k] * other.q_[k][j];
        g.q_[i][j] = s;
      }
      double s = t_.x[i];
      for (int k = 0; k < 3; ++k) s += q_[i][k] * other.t_.x[k];
      g.t_.x[i] = s;
    }
    return g;
  }

 private:
  SpaceKind kind_ = SpaceKind::Euclidean2;
  Mat3 q_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Point t_{};
  std::complex<double> alpha_{1.0, 0.0};
  std::complex<double> beta_{0.0, 0.0};
  bool reflect_ = false;
};

class Space {
 public:
  constexpr explicit Space(SpaceKind k = SpaceKind::Euclidean2) : kind_(k) {}

  SpaceKind kind() const { return kind_; }
  int dim() const { return kind_ == SpaceKind::Euclidean3 ? 3 : 2; }
  bool hyperbolic() const { return kind_ == SpaceKind::HyperbolicPlane; }
  Point origin() const { return {}; }

  bool valid(const Point& p) const {
    for (double c : p.x)
      if (!std::isfinite(c)) return false;
    if (dim() == 2 && p.x[2] != 0.0) return false;
    if (hyperbolic()) return p.x[0] * p.x[0] + p.x[1] * p.x[1] < 1.0;
    return true;
  }

  void require_valid(const Point& p) const {
    if (!valid(p)) throw InputError("point is not valid in the chart of " + std::string(to_string(kind_)));
  }

  double distance(const Point& p, const Point& q) const {
    require_valid(p);
    require_valid(q);
    return distance_unchecked(p, q);
  }

  double distance_unchecked(const Point& p, const Point& q) const {
    const double dx = p.x[0] - q.x[0], dy = p.x[1] - q.x[1], dz = p.x[2] - q.x[2];
    const double e2 = dx * dx + dy * dy + dz * dz;
    if (!hyperbolic()) return std::sqrt(e2);
    // cosh d = 1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2))  <=>  sinh(d/2) = |p-q| / sqrt(...)
    const double np = 1.0 - (p.x[0] * p.x[0] + p.x[1] * p.x[1]);
    const double nq = 1.0 - (q.x[0] * q.x[0] + q.x[1] * q.x[1]);
    return 2.0 * std::asinh(std::sqrt(e2 / (np * nq)));
  }

  double ball_volume(double r) const {
    if (!(r >= 0.0)) throw InputError("ball radius must be non-negative");
    switch (kind_) {
      case SpaceKind::Euclidean2: return std::numbers::pi * r * r;
      case SpaceKind::Euclidean3: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
      case SpaceKind::HyperbolicPlane: {
        const double s = std::sinh(r / 2.0);
        return 4.0 * std::numbers::pi * s * s;  // 2pi (cosh r - 1)
      }
    }
    return 0.0;
  }

  // Inverse of ball_volume.
  double ball_radius_for_volume(double v) const {
    if (!(v >= 0.0)) throw InputError("volume must be non-negative");
    switch (kind_) {
      case SpaceKind::Euclidean2: return std::sqrt(v / std::numbers::pi);
      case SpaceKind::Euclidean3: return std::cbrt(v * 3.0 / (4.0 * std::numbers::pi));
      case SpaceKind::HyperbolicPlane: return 2.0 * std::asinh(std::sqrt(v / (4.0 * std::numbers::pi)));
    }
    return 0.0;
  }

  // Area (volume) density of the sphere of radius t: d/dt ball_volume(t).
  double sphere_measure(double t) const {
    switch (kind_) {
      case SpaceKind::Euclidean2: return 2.0 * std::numbers::pi * t;
      case SpaceKind::Euclidean3: return 4.0 * std::numbers::pi * t * t;
      case SpaceKind::HyperbolicPlane: return 2.0 * std::numbers::pi * std::sinh(t);
    }
    return 0.0;
  }

  // Volume density of the chart w.r.t. Lebesgue measure at p.
  double chart_density(const Point& p) const {
    if (!hyperbolic()) return 1.0;
    const double s = 1.0 - (p.x[0] * p.x[0] + p.x[1] * p.x[1]);
    return 4.0 / (s * s);
  }

  // Chart radius of the geodesic ball B(0, r).
  double chart_radius(double r) const { return hyperbolic() ? std::tanh(r / 2.0) : r; }

  Polar to_polar(const Point& p) const {
    Polar out;
    const double planar = std::hypot(p.x[0], p.x[1]);
    out.phi = detail::wrap_angle(std::atan2(p.x[1], p.x[0]));
    if (kind_ == SpaceKind::Euclidean3) {
      out.rho = std::hypot(planar, p.x[2]);
      out.theta = std::atan2(planar, p.x[2]);
    } else if (hyperbolic()) {
      out.rho = 2.0 * std::atanh(std::min(planar, detail::kDiskClamp));
    } else {
      out.rho = planar;
    }
    return out;
  }

  Point from_polar(const Polar& s) const {
    if (kind_ == SpaceKind::Euclidean3) {
      const double st = std::sin(s.theta);
      return {s.rho * st * std::cos(s.phi), s.rho * st * std::sin(s.phi), s.rho * std::cos(s.theta)};
    }
    const double r = chart_radius(s.rho);
    if (hyperbolic()) return detail::from_complex(std::polar(r, s.phi));
    return {r * std::cos(s.phi), r * std::sin(s.phi), 0.0};
  }

  Embedded embed(const Point& p) const {
    if (!hyperbolic()) return p.x;
    const double s = p.x[0] * p.x[0] + p.x[1] * p.x[1];
    const double inv = 1.0 / (1.0 - s);
    return {(1.0 + s) * inv, 2.0 * p.x[0] * inv, 2.0 * p.x[1] * inv};
  }

  Point unembed(const Embedded& e) const {
    if (!hyperbolic()) return {e[0], e[1], e[2]};
    const double f = 1.0 / (1.0 + e[0]);
    return detail::from_complex({e[1] * f, e[2] * f});
  }

  // A monotone function of distance for embedded points: squared Euclidean
  // distance, or the squared Minkowski chord 4 sinh^2(d/2) in H2.
  double chord2(const Embedded& a, const Embedded& b) const {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    if (!hyperbolic()) return d0 * d0 + d1 * d1 + d2 * d2;
    return std::max(0.0, d1 * d1 + d2 * d2 - d0 * d0);
  }

  double chord2_of_distance(double r) const {
    if (!hyperbolic()) return r * r;
    const double s = 2.0 * std::sinh(r / 2.0);
    return s * s;
  }

  double distance_of_chord2(double c2) const {
    if (!hyperbolic()) return std::sqrt(c2);
    return 2.0 * std::asinh(std::sqrt(c2) / 2.0);
  }

  double embedded_distance(const Embedded& a, const Embedded& b) const {
    return distance_of_chord2(chord2(a, b));
  }

  // Point at distance t from p along the geodesic towards q (q != p).
  Point geodesic_point(const Point& p, const Point& q, double t) const {
    if (hyperbolic()) {
      const auto a = detail::as_complex(p);
      const auto w = detail::mobius_translate(detail::as_complex(q), -a);
      const double n = std::abs(w);
      if (n == 0.0) return p;
      return detail::from_complex(detail::mobius_translate(w / n * std::tanh(t / 2.0), a));
    }
    const double d = distance_unchecked(p, q);
    if (d == 0.0) return p;
    Point r;
    for (int i = 0; i < 3; ++i) r.x[i] = p.x[i] + (q.x[i] - p.x[i]) * (t / d);
    return r;
  }

  // Geodesic polar sampling: uniform direction, radius by inverse CDF of
  // ball_volume(t) / ball_volume(r).
  Point sample_uniform_ball(const Point& center, double r, Rng& rng) const {
    require_valid(center);
    if (!(r > 0.0)) throw InputError("sample_uniform_ball needs r > 0");
    const double u = rng.uniform();
    Polar s;
    s.phi = 2.0 * std::numbers::pi * rng.uniform();
    switch (kind_) {
      case SpaceKind::Euclidean2: s.rho = r * std::sqrt(u); break;
      case SpaceKind::Euclidean3:
        s.rho = r * std::cbrt(u);
        s.theta = std::acos(1.0 - 2.0 * rng.uniform());
        break;
      case SpaceKind::HyperbolicPlane: s.rho = 2.0 * std::asinh(std::sqrt(u) * std::sinh(r / 2.0)); break;
    }
    const Point local = from_polar(s);
    if (hyperbolic())
      return detail::from_complex(detail::mobius_translate(detail::as_complex(local), detail::as_complex(center)));
    return {center.x[0] + local.x[0], center.x[1] + local.x[1], center.x[2] + local.x[2]};
  }

  // Isometry with g(0) = target whose rotational part is uniform.
  Isometry sample_isometry_to(const Point& target, Rng& rng) const {
    require_valid(target);
    switch (kind_) {
      case SpaceKind::Euclidean2: {
        const double a = 2.0 * std::numbers::pi * rng.uniform();
        const double c = std::cos(a), s = std::sin(a);
        return Isometry::euclidean(kind_, {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}}, target);
      }
      case SpaceKind::Euclidean3: {
        // Uniform unit quaternion.
        double q[4];
        double n = 0.0;
        do {
          n = 0.0;
          for (double& c : q) {
            c = rng.normal();
            n += c * c;
          }
        } while (n < 1e-12);
        n = std::sqrt(n);
        for (double& c : q) c /= n;
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        Isometry::Mat3 m{{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
                          {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
                          {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
        return Isometry::euclidean(kind_, m, target);
      }
      case SpaceKind::HyperbolicPlane: {
        // T_target o R_angle
        const double a = 2.0 * std::numbers::pi * rng.uniform();
        return Isometry::hyperbolic(0.0, detail::as_complex(target)).compose(Isometry::hyperbolic(a, 0.0));
      }
    }
    return Isometry::identity(kind_);
  }

 private:
  SpaceKind kind_;
};

}  // namespace bperc
