#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bperc/geometry.hpp"
#include "bperc/rng.hpp"
#include "bperc/stats.hpp"

using namespace bperc;

namespace {

const SpaceKind kAll[] = {SpaceKind::Euclidean2, SpaceKind::Euclidean3, SpaceKind::HyperbolicPlane};

// Monte-Carlo volume of B(0,r): uniform points in the chart box around the
// ball, weighted by the metric density.
std::pair<double, double> mc_volume(const Space& sp, double r, int n, Rng& rng) {
  const double R = sp.hyperbolic() ? std::tanh(r / 2.0) : r;
  const int dim = sp.dim();
  const double box = std::pow(2.0 * R, dim);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Point p;
    for (int k = 0; k < dim; ++k) p.x[static_cast<std::size_t>(k)] = rng.uniform(-R, R);
    double norm2 = 0.0;
    for (int k = 0; k < dim; ++k) norm2 += p.x[static_cast<std::size_t>(k)] * p.x[static_cast<std::size_t>(k)];
    if (norm2 > R * R) continue;
    w[static_cast<std::size_t>(i)] = box * sp.chart_density(p);
  }
  auto s = stats::summarize(w);
  return {s.mean, s.se};
}

Point random_point(const Space& sp, Rng& rng) {
  return sp.sample_uniform_ball(sp.origin(), sp.hyperbolic() ? 5.0 : 10.0, rng);
}

}  // namespace

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(Space(SpaceKind::Euclidean2).distance({0, 0}, {3, 4}), 5.0);
  EXPECT_NEAR(Space(SpaceKind::HyperbolicPlane).distance({0, 0}, {0.5, 0}), std::log(3.0), 1e-12);
  for (auto k : kAll) EXPECT_EQ(Space(k).distance({0.1, 0.2}, {0.1, 0.2}), 0.0);
}

TEST(Distance, RejectsInvalidChartPoints) {
  Space h(SpaceKind::HyperbolicPlane);
  EXPECT_THROW(h.distance({1.0, 0.0}, {0, 0}), InputError);
  EXPECT_THROW(h.distance({NAN, 0.0}, {0, 0}), InputError);
  EXPECT_THROW(Space(SpaceKind::Euclidean2).distance({INFINITY, 0.0}, {0, 0}), InputError);
}

TEST(Distance, RadialGeodesicMatchesArtanh) {
  Space h(SpaceKind::HyperbolicPlane);
  for (double t : {0.01, 0.3, 0.7, 0.95, 0.999})
    EXPECT_NEAR(h.distance({0, 0}, {0, t}), 2.0 * std::atanh(t), 1e-9 * (1 + 2.0 * std::atanh(t)));
}

TEST(Distance, SymmetricAndTriangle) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(1, 0, "triangle");
    for (int i = 0; i < 2000; ++i) {
      Point a = random_point(sp, rng), b = random_point(sp, rng), c = random_point(sp, rng);
      const double ab = sp.distance(a, b), ba = sp.distance(b, a);
      EXPECT_NEAR(ab, ba, 1e-9 * (1 + ab));
      EXPECT_LE(sp.distance(a, c), (ab + sp.distance(b, c)) * (1 + 1e-9) + 1e-12);
    }
  }
}

TEST(BallVolume, ClosedForms) {
  EXPECT_NEAR(Space(SpaceKind::Euclidean2).ball_volume(1.0), std::numbers::pi, 1e-14);
  EXPECT_NEAR(Space(SpaceKind::Euclidean3).ball_volume(1.0), 4.0 / 3.0 * std::numbers::pi, 1e-14);
  EXPECT_NEAR(Space(SpaceKind::HyperbolicPlane).ball_volume(1.0), 2.0 * std::numbers::pi * (std::cosh(1.0) - 1.0), 1e-12);
  EXPECT_NEAR(Space(SpaceKind::HyperbolicPlane).ball_volume(1.0), 3.41228, 1e-5);
  for (auto k : kAll) {
    EXPECT_EQ(Space(k).ball_volume(0.0), 0.0);
    EXPECT_THROW(Space(k).ball_volume(-1.0), InputError);
    double prev = -1.0;
    for (double r = 0.0; r < 6.0; r += 0.25) {
      const double v = Space(k).ball_volume(r);
      EXPECT_GT(v, prev);
      prev = v;
      EXPECT_NEAR(Space(k).ball_radius_for_volume(v), r, 1e-9 * (1 + r));
    }
  }
}

TEST(BallVolume, MatchesMonteCarlo) {
  for (auto k : kAll) {
    Space sp(k);
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
      Rng rng = Rng::stream(7, static_cast<std::uint64_t>(r * 8), "mc-volume");
      auto [m, se] = mc_volume(sp, r, 200000, rng);
      EXPECT_NEAR(m, sp.ball_volume(r), 3.0 * se + 1e-12) << to_string(k) << " r=" << r;
    }
  }
}

TEST(SampleUniformBall, AreaFractions) {
  {
    Space sp(SpaceKind::Euclidean2);
    Rng rng = Rng::stream(3, 0, "ball");
    int inside = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) inside += sp.distance(sp.origin(), sp.sample_uniform_ball(sp.origin(), 1.0, rng)) <= std::sqrt(0.5);
    EXPECT_NEAR(inside / double(n), 0.5, 3.0 * std::sqrt(0.25 / n));
  }
  {
    Space sp(SpaceKind::HyperbolicPlane);
    Rng rng = Rng::stream(3, 1, "ball");
    int inside = 0;
    const int n = 100000;
    const double p = (std::cosh(1.0) - 1.0) / (std::cosh(2.0) - 1.0);
    EXPECT_NEAR(p, 0.1966, 1e-4);
    for (int i = 0; i < n; ++i) inside += sp.distance(sp.origin(), sp.sample_uniform_ball(sp.origin(), 2.0, rng)) <= 1.0;
    EXPECT_NEAR(inside / double(n), p, 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(SampleUniformBall, StaysInsideAndShrinks) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(4, 0, "inside");
    const Point c = sp.hyperbolic() ? Point{0.3, -0.4} : Point{2.0, 1.0, sp.dim() == 3 ? -1.0 : 0.0};
    for (int i = 0; i < 5000; ++i) EXPECT_LE(sp.distance(c, sp.sample_uniform_ball(c, 1.5, rng)), 1.5 + 1e-9);
    EXPECT_LT(sp.distance(c, sp.sample_uniform_ball(c, 1e-10, rng)), 1e-9);
  }
}

TEST(SampleUniformBall, SubBallChiSquare) {
  // Counts in the four quadrants and two radial shells, expected by volume.
  for (auto k : {SpaceKind::Euclidean2, SpaceKind::HyperbolicPlane}) {
    Space sp(k);
    Rng rng = Rng::stream(5, 0, "chi");
    const double r = 2.0, r_in = 1.2;
    std::vector<double> obs(8, 0.0), exp(8, 0.0);
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      Point p = sp.sample_uniform_ball(sp.origin(), r, rng);
      auto s = sp.to_polar(p);
      int q = std::min(3, static_cast<int>(s.phi / (std::numbers::pi / 2)));
      obs[static_cast<std::size_t>(q + 4 * (s.rho > r_in))] += 1;
    }
    const double f_in = sp.ball_volume(r_in) / sp.ball_volume(r);
    for (int q = 0; q < 4; ++q) {
      exp[static_cast<std::size_t>(q)] = n * f_in / 4;
      exp[static_cast<std::size_t>(q + 4)] = n * (1 - f_in) / 4;
    }
    EXPECT_GT(stats::chi_square(obs, exp).p, 0.001);
  }
}

TEST(Isometry, SampleToTarget) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(6, 0, "iso");
    for (int i = 0; i < 200; ++i) {
      const Point t = random_point(sp, rng);
      const Isometry g = sp.sample_isometry_to(t, rng);
      EXPECT_LT(sp.distance(g(sp.origin()), t), 1e-9 * (1 + sp.distance(sp.origin(), t)));
    }
  }
  Space h(SpaceKind::HyperbolicPlane);
  Rng rng = Rng::stream(6, 1, "iso");
  const Isometry g = h.sample_isometry_to(h.origin(), rng);
  const Point p{0.3, 0.4};
  EXPECT_NEAR(std::hypot(g(p).x[0], g(p).x[1]), 0.5, 1e-12);
  Space e(SpaceKind::Euclidean2);
  EXPECT_LT(e.distance(e.sample_isometry_to({1, 2}, rng)(e.origin()), {1, 2}), 1e-12);
}

TEST(Isometry, PreservesDistanceAndComposes) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(8, 0, "preserve");
    for (int i = 0; i < 1000; ++i) {
      const Isometry g = sp.sample_isometry_to(random_point(sp, rng), rng);
      const Point p = random_point(sp, rng), q = random_point(sp, rng);
      const double d = sp.distance(p, q);
      EXPECT_LT(std::abs(sp.distance(g(p), g(q)) - d), 1e-9 * (1 + d));
    }
    for (int i = 0; i < 200; ++i) {
      Isometry a = sp.sample_isometry_to(random_point(sp, rng), rng);
      Isometry b = sp.sample_isometry_to(random_point(sp, rng), rng);
      Isometry c = sp.sample_isometry_to(random_point(sp, rng), rng);
      if (k == SpaceKind::HyperbolicPlane && i % 2) b = b.compose(Isometry::hyperbolic(0.3, {0.1, 0.2}, true));
      const Point p = sp.sample_uniform_ball(sp.origin(), 1.0, rng);
      const Point l = a.compose(b).compose(c)(p), r = a.compose(b.compose(c))(p), direct = a(b(c(p)));
      EXPECT_LT(sp.distance(l, r), 1e-7);
      EXPECT_LT(sp.distance(l, direct), 1e-7);
    }
  }
}

TEST(Isometry, PushforwardOfUniformBall) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(9, 0, "ks");
    const Point x = sp.hyperbolic() ? Point{0.4, 0.2} : Point{1.0, -2.0, sp.dim() == 3 ? 0.5 : 0.0};
    std::vector<double> a, b;
    for (int i = 0; i < 4000; ++i) {
      const Isometry g = sp.sample_isometry_to(x, rng);
      a.push_back(sp.distance(x, g(sp.sample_uniform_ball(sp.origin(), 1.5, rng))));
      b.push_back(sp.distance(x, sp.sample_uniform_ball(x, 1.5, rng)));
    }
    EXPECT_GT(stats::ks_two_sample(a, b).p, 0.05) << to_string(k);
  }
}

TEST(Embedding, ChordConsistency) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(10, 0, "chord");
    for (int i = 0; i < 500; ++i) {
      const Point p = random_point(sp, rng), q = random_point(sp, rng);
      const double d = sp.distance(p, q);
      EXPECT_NEAR(sp.embedded_distance(sp.embed(p), sp.embed(q)), d, 1e-7 * (1 + d));
      EXPECT_LT(sp.distance(sp.unembed(sp.embed(p)), p), 1e-8);
    }
  }
}

TEST(Geodesic, PointAtDistance) {
  for (auto k : kAll) {
    Space sp(k);
    Rng rng = Rng::stream(11, 0, "geo");
    for (int i = 0; i < 300; ++i) {
      const Point p = random_point(sp, rng), q = random_point(sp, rng);
      const double d = sp.distance(p, q), t = rng.uniform() * d;
      const Point m = sp.geodesic_point(p, q, t);
      EXPECT_NEAR(sp.distance(p, m), t, 1e-7 * (1 + d));
      EXPECT_NEAR(sp.distance(m, q), d - t, 1e-7 * (1 + d));
    }
  }
}
