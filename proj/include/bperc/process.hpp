#pragma once

// Marked point measures: Poisson sampling, radius laws, and the local
// modifications (insertion, deletion in a ball, label thinning).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/geometry.hpp"
#include "bperc/rng.hpp"

namespace bperc {

class RadiusLaw {
 public:
  enum class Kind { Constant, BoundedIID, ExponentialTruncated };

  static RadiusLaw constant(double r) {
    if (!(r > 0.0)) throw InputError("constant radius must be positive");
    RadiusLaw l;
    l.kind_ = Kind::Constant;
    l.values_ = {r};
    l.probs_ = {1.0};
    return l;
  }

  static RadiusLaw bounded_iid(std::vector<std::pair<double, double>> table) {
    if (table.empty()) throw InputError("bounded radius law needs at least one value");
    RadiusLaw l;
    l.kind_ = Kind::BoundedIID;
    l.values_.clear();
    l.probs_.clear();
    double total = 0.0;
    for (auto [v, p] : table) {
      if (!(v > 0.0) || !(p >= 0.0)) throw InputError("radius values must be positive, probabilities non-negative");
      l.values_.push_back(v);
      l.probs_.push_back(p);
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("radius probabilities must sum to 1");
    return l;
  }

  // min_radius + Exp(rate), conditioned on not exceeding cap.
  static RadiusLaw exponential_truncated(double rate, double cap, double min_radius) {
    if (!(rate > 0.0) || !(cap > min_radius) || !(min_radius > 0.0))
      throw InputError("truncated exponential law needs rate > 0 and 0 < min_radius < cap");
    RadiusLaw l;
    l.kind_ = Kind::ExponentialTruncated;
    l.values_ = {min_radius, cap};
    l.probs_.clear();
    l.rate_ = rate;
    return l;
  }

  Kind kind() const { return kind_; }

  double sample(Rng& rng) const {
    switch (kind_) {
      case Kind::Constant: return values_[0];
      case Kind::BoundedIID: {
        double u = rng.uniform();
        for (std::size_t i = 0; i < values_.size(); ++i) {
          if (u < probs_[i]) return values_[i];
          u -= probs_[i];
        }
        return values_.back();
      }
      case Kind::ExponentialTruncated: {
        const double span = values_[1] - values_[0];
        const double mass = -std::expm1(-rate_ * span);
        return values_[0] - std::log1p(-rng.uniform() * mass) / rate_;
      }
    }
    return 0.0;
  }

  double min_radius() const {
    if (kind_ == Kind::BoundedIID) {
      double m = values_[0];
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (probs_[i] > 0.0) m = std::min(m, values_[i]);
      return m;
    }
    return values_[0];
  }

  double max_radius() const {
    if (kind_ == Kind::ExponentialTruncated) return values_[1];
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (probs_[i] > 0.0) m = std::max(m, values_[i]);
    return m;
  }

  // "constant 1" | "bounded 0.5:0.3,1:0.7" | "exptrunc <rate> <cap> <min>"
  std::string describe() const;
  static RadiusLaw parse(const std::string& text);

  friend bool operator==(const RadiusLaw&, const RadiusLaw&) = default;

 private:
  Kind kind_ = Kind::Constant;
  std::vector<double> values_{1.0};
  std::vector<double> probs_{1.0};
  double rate_ = 0.0;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  // from_chars does not accept a leading '+'.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("cannot parse number '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline std::string RadiusLaw::describe() const {
  using detail::format_double;
  switch (kind_) {
    case Kind::Constant: return "constant " + format_double(values_[0]);
    case Kind::BoundedIID: {
      std::string s = "bounded ";
      for (std::size_t i = 0; i < values_.size(); ++i) {
        if (i) s += ',';
        s += format_double(values_[i]) + ':' + format_double(probs_[i]);
      }
      return s;
    }
    case Kind::ExponentialTruncated:
      return "exptrunc " + format_double(rate_) + ' ' + format_double(values_[1]) + ' ' + format_double(values_[0]);
  }
  return {};
}

inline RadiusLaw RadiusLaw::parse(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  if (kind == "constant") {
    std::string v;
    in >> v;
    return constant(detail::parse_double(v));
  }
  if (kind == "bounded") {
    std::string rest;
    in >> rest;
    std::vector<std::pair<double, double>> table;
    std::size_t pos = 0;
    while (pos < rest.size()) {
      const std::size_t comma = std::min(rest.find(',', pos), rest.size());
      const std::string item = rest.substr(pos, comma - pos);
      const std::size_t colon = item.find(':');
      if (colon == std::string::npos) throw InputError("bounded law entries are value:probability");
      table.emplace_back(detail::parse_double(item.substr(0, colon)), detail::parse_double(item.substr(colon + 1)));
      pos = comma + 1;
    }
    return bounded_iid(std::move(table));
  }
  if (kind == "exptrunc") {
    std::string a, b, c;
    in >> a >> b >> c;
    return exponential_truncated(detail::parse_double(a), detail::parse_double(b), detail::parse_double(c));
  }
  throw InputError("unknown radius law '" + text + "'");
}

struct Atom {
  Point point;
  double radius = 1.0;
  double label = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

// A finite simple counting measure with radius marks and [0,1] labels.
// Values are immutable in practice: every modification returns a new measure.
class PointMeasure {
 public:
  struct Header {
    SpaceKind space = SpaceKind::Euclidean2;
    double window = 0.0;  // analysis radius the sample was drawn for
    double halo = 0.0;    // atoms live in B(0, window + halo)
    double intensity = 0.0;
    std::uint64_t seed = 0;
    std::string radius_law = "constant 1";
    friend bool operator==(const Header&, const Header&) = default;
  };

  PointMeasure() = default;
  PointMeasure(Header h, std::vector<Atom> atoms) : header_(std::move(h)), atoms_(std::move(atoms)) {}

  const Header& header() const { return header_; }
  Space space() const { return Space(header_.space); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  double sampling_radius() const { return header_.window + header_.halo; }

  bool is_simple() const {
    std::vector<std::array<double, 3>> pts;
    pts.reserve(atoms_.size());
    for (const auto& a : atoms_) pts.push_back(a.point.x);
    std::sort(pts.begin(), pts.end());
    return std::adjacent_find(pts.begin(), pts.end()) == pts.end();
  }

  double max_radius() const {
    double m = 0.0;
    for (const auto& a : atoms_) m = std::max(m, a.radius);
    return m;
  }

  std::size_t count_in_ball(const Point& c, double r) const {
    const Space sp = space();
    std::size_t n = 0;
    for (const auto& a : atoms_)
      if (sp.distance_unchecked(a.point, c) <= r) ++n;
    return n;
  }

  friend bool operator==(const PointMeasure&, const PointMeasure&) = default;

 private:
  Header header_;
  std::vector<Atom> atoms_;
};

// Poisson point measure with intensity lambda * mu in B(0, window + halo),
// i.i.d. radii and uniform labels.
inline PointMeasure sample_poisson(Space space, double window, double halo, double intensity,
                                   const RadiusLaw& law, Rng& rng) {
  if (!(intensity > 0.0)) throw InputError("intensity must be positive");
  if (!(window >= 0.0) || !(halo >= 0.0)) throw InputError("window and halo must be non-negative");
  const double radius = window + halo;
  const std::uint64_t n = rng.poisson(intensity * space.ball_volume(radius));
  std::vector<Atom> atoms;
  atoms.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Atom a;
    a.point = radius > 0.0 ? space.sample_uniform_ball(space.origin(), radius, rng) : space.origin();
    a.radius = law.sample(rng);
    a.label = rng.uniform();
    atoms.push_back(a);
  }
  PointMeasure::Header h{space.kind(), window, halo, intensity, rng.key(), law.describe()};
  return {std::move(h), std::move(atoms)};
}

inline PointMeasure insert_atom(const PointMeasure& m, const Point& x, double radius, double label) {
  const Space sp = m.space();
  sp.require_valid(x);
  if (!(radius > 0.0)) throw InputError("inserted radius must be positive");
  if (!(label >= 0.0 && label <= 1.0)) throw InputError("label must lie in [0,1]");
  for (const auto& a : m.atoms())
    if (a.point == x) throw InputError("insert_atom: point already present (measure must stay simple)");
  auto atoms = m.atoms();
  atoms.push_back({x, radius, label});
  return {m.header(), std::move(atoms)};
}

// Removes the atoms centered in B(center, R) (and, with a cap, only those of
// radius <= cap).
inline PointMeasure delete_in_ball(const PointMeasure& m, const Point& center, double R,
                                   std::optional<double> radius_cap = std::nullopt) {
  if (!(R > 0.0)) throw InputError("delete_in_ball needs R > 0");
  const Space sp = m.space();
  std::vector<Atom> kept;
  kept.reserve(m.size());
  for (const auto& a : m.atoms()) {
    const bool inside = sp.distance_unchecked(a.point, center) <= R;
    const bool capped = !radius_cap || a.radius <= *radius_cap;
    if (!(inside && capped)) kept.push_back(a);
  }
  return {m.header(), std::move(kept)};
}

inline PointMeasure thin_by_label(const PointMeasure& m, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InputError("thinning threshold must lie in [0,1]");
  std::vector<Atom> kept;
  for (const auto& a : m.atoms())
    if (a.label <= threshold) kept.push_back(a);
  auto h = m.header();
  h.intensity *= threshold;
  return {std::move(h), std::move(kept)};
}

// Line format:
//   # bperc point-measure v1
//   space <E2|E3|H2>
//   window <L> / halo <halo> / intensity <lambda> / seed <u64> / radius_law <law>
//   atoms <n>
//   x y [z] radius label          (one line per atom, shortest round-trip decimals)
inline void write_point_measure(std::ostream& out, const PointMeasure& m) {
  using detail::format_double;
  const auto& h = m.header();
  const int dim = Space(h.space).dim();
  out << "# bperc point-measure v1\n"
      << "space " << to_string(h.space) << '\n'
      << "window " << format_double(h.window) << '\n'
      << "halo " << format_double(h.halo) << '\n'
      << "intensity " << format_double(h.intensity) << '\n'
      << "seed " << h.seed << '\n'
      << "radius_law " << h.radius_law << '\n'
      << "atoms " << m.size() << '\n';
  for (const auto& a : m.atoms()) {
    for (int k = 0; k < dim; ++k) out << format_double(a.point.x[static_cast<std::size_t>(k)]) << ' ';
    out << format_double(a.radius) << ' ' << format_double(a.label) << '\n';
  }
}

inline PointMeasure read_point_measure(std::istream& in) {
  PointMeasure::Header h;
  std::string line;
  std::size_t expected = 0;
  bool have_count = false;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw InputError("point measure line " + std::to_string(lineno) + ": " + msg);
  };
  while (!have_count && std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) fail("expected 'key value'");
    const std::string key = line.substr(0, sp), value = line.substr(sp + 1);
    if (key == "space") h.space = parse_space_kind(value);
    else if (key == "window") h.window = detail::parse_double(value);
    else if (key == "halo") h.halo = detail::parse_double(value);
    else if (key == "intensity") h.intensity = detail::parse_double(value);
    else if (key == "seed") h.seed = std::stoull(value);
    else if (key == "radius_law") h.radius_law = value;
    else if (key == "atoms") {
      expected = std::stoull(value);
      have_count = true;
    } else
      fail("unknown key '" + key + "'");
  }
  if (!have_count) fail("missing 'atoms' line");
  const int dim = Space(h.space).dim();
  std::vector<Atom> atoms;
  atoms.reserve(expected);
  while (atoms.size() < expected && std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok[5];
    const int need = dim + 2;
    for (int k = 0; k < need; ++k)
      if (!(ls >> tok[k])) fail("expected " + std::to_string(need) + " fields");
    Atom a;
    for (int k = 0; k < dim; ++k) a.point.x[static_cast<std::size_t>(k)] = detail::parse_double(tok[k]);
    a.radius = detail::parse_double(tok[dim]);
    a.label = detail::parse_double(tok[dim + 1]);
    atoms.push_back(a);
  }
  if (atoms.size() != expected) fail("atom count mismatch");
  return {std::move(h), std::move(atoms)};
}

}  // namespace bperc
