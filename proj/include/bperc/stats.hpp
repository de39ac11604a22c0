#pragma once

// Small statistics toolkit for the Monte-Carlo checks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "bperc/errors.hpp"

namespace bperc::stats {

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    s.se = s.sd / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

inline double chi_square_sf(double stat, double dof) {
  if (dof <= 0.0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, std::max(0.0, stat)));
}

struct ChiSquare {
  double stat = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

// Pearson goodness of fit; cells with zero expectation must be empty.
inline ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) throw InputError("chi_square: size mismatch");
  ChiSquare r;
  int used = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) {
      if (observed[i] > 0.0) return {INFINITY, 0.0, 0.0};
      continue;
    }
    r.stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    ++used;
  }
  r.dof = std::max(0, used - 1);
  r.p = chi_square_sf(r.stat, r.dof);
  return r;
}

// Asymptotic Kolmogorov tail Q(t) = 2 sum (-1)^{k-1} exp(-2 k^2 t^2).
inline double kolmogorov_q(double t) {
  if (t < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InputError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)};
}

// Total variation between two count histograms (normalized internally).
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = std::max(p.size(), q.size());
  const double sp = std::accumulate(p.begin(), p.end(), 0.0), sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (sp <= 0.0 || sq <= 0.0) return 0.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] / sp : 0.0;
    const double b = i < q.size() ? q[i] / sq : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

// Wilson score interval for k successes in n trials.
inline std::pair<double, double> wilson(double k, double n, double z = 1.959963984540054) {
  if (n <= 0.0) return {0.0, 1.0};
  const double p = k / n, z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double mid = (p + z2 / (2.0 * n)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
  return {std::max(0.0, mid - half), std::min(1.0, mid + half)};
}

struct Anova {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p = 1.0;
};

// One-way ANOVA across groups of observations.
inline Anova one_way_anova(const std::vector<std::vector<double>>& groups) {
  Anova r;
  std::size_t n = 0, k = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    ++k;
    n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  if (k < 2 || n <= k) return r;
  grand /= static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    const double m = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ssw += (x - m) * (x - m);
  }
  r.df_between = static_cast<double>(k - 1);
  r.df_within = static_cast<double>(n - k);
  if (ssw <= 0.0) {
    r.f = ssb > 0.0 ? INFINITY : 0.0;
    r.p = ssb > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.f = (ssb / r.df_between) / (ssw / r.df_within);
  boost::math::fisher_f dist(r.df_between, r.df_within);
  r.p = boost::math::cdf(boost::math::complement(dist, r.f));
  return r;
}

// Least-squares slope and intercept.
inline std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

}  // namespace bperc::stats
