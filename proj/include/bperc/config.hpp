#pragma once

// Run configuration: a sectioned `key = value` text file, validation of every
// downstream precondition, and the seeded sampling pipeline shared by the
// CLI and the acceptance suite.
//
//   [model]       space, lambda, radius_law
//   [window]      L, L_a, h
//   [trifurcation] r, lambda_y, lambda_z
//   [run]         seed, replicas, threads, out
//   [experiment]  name plus free-form parameters

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bperc/errors.hpp"
#include "bperc/geometry.hpp"
#include "bperc/process.hpp"
#include "bperc/rng.hpp"
#include "bperc/scene.hpp"

namespace bperc {

struct ModelConfig {
  SpaceKind space = SpaceKind::Euclidean2;
  double lambda = 1.0;
  std::string radius_law = "constant 1";
  double L = 12.0;
  double L_a = 10.0;
  double h = 0.25;
  double r = 0.0;
  double lambda_y = 1.0;
  double lambda_z = 1.0;

  double halo() const { return L - L_a; }
  RadiusLaw law() const { return RadiusLaw::parse(radius_law); }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct RunConfig {
  ModelConfig model;
  std::string experiment;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 1;
  int replicas = 1;
  int threads = 1;
  std::string out = "out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  bool has(const std::string& key) const { return params.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
  double number(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
      return detail::parse_double(it->second);
    } catch (const InputError&) {
      throw ConfigError("[experiment] " + key + ": expected a number, got '" + it->second + "'");
    }
  }
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto a = tok.find_first_not_of(" \t"), b = tok.find_last_not_of(" \t");
      if (a == std::string::npos) continue;
      try {
        out.push_back(detail::parse_double(tok.substr(a, b - a + 1)));
      } catch (const InputError&) {
        throw ConfigError("[experiment] " + key + ": bad list entry '" + tok + "'");
      }
    }
    return out;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InputError("cannot parse integer '" + s + "'");
  return v;
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  const auto& m = c.model;
  auto fail = [](const std::string& field, const std::string& msg) { throw ConfigError(field + ": " + msg); };
  if (!(m.lambda > 0.0)) fail("[model] lambda", "must be positive");
  RadiusLaw law;
  try {
    law = m.law();
  } catch (const InputError& e) {
    fail("[model] radius_law", e.what());
  }
  if (!(m.L_a > 0.0)) fail("[window] L_a", "must be positive");
  if (!(m.L > m.L_a)) fail("[window] L", "must exceed L_a");
  if (!(m.h > 0.0)) fail("[window] h", "must be positive");
  if (m.h > law.min_radius() / 4.0 + 1e-12)
    fail("[window] h", "h = " + detail::format_double(m.h) + " exceeds min_radius/4 = " +
                           detail::format_double(law.min_radius() / 4.0) + "; lower h or raise the smallest radius");
  if (!(m.r >= 0.0)) fail("[trifurcation] r", "must be non-negative");
  const double need = law.max_radius() + 2.0 * m.r;
  if (m.halo() < need - 1e-12)
    fail("[window] L", "halo L - L_a = " + detail::format_double(m.halo()) + " is below max_radius + 2r = " +
                           detail::format_double(need) + "; use L >= " + detail::format_double(m.L_a + need));
  if (!(m.lambda_y > 0.0)) fail("[trifurcation] lambda_y", "must be positive");
  if (!(m.lambda_z > 0.0)) fail("[trifurcation] lambda_z", "must be positive");
  if (m.space == SpaceKind::HyperbolicPlane && m.L > 16.0)
    fail("[window] L", "hyperbolic windows above 16 exceed the disk chart's precision");
  if (c.replicas < 1) fail("[run] replicas", "must be at least 1");
  if (c.threads < 1) fail("[run] threads", "must be at least 1");
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line, section;
  int lineno = 0;
  auto where = [&](const std::string& key) { return "line " + std::to_string(lineno) + " [" + section + "] " + key; };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(body.substr(1, body.size() - 2));
      if (section != "model" && section != "window" && section != "trifurcation" && section != "run" &&
          section != "experiment")
        throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside a section");
    try {
      auto& m = c.model;
      auto num = [&] { return detail::parse_double(value); };
      if (section == "model" && key == "space") m.space = parse_space_kind(value);
      else if (section == "model" && key == "lambda") m.lambda = num();
      else if (section == "model" && key == "radius_law") {
        RadiusLaw::parse(value);
        m.radius_law = value;
      } else if (section == "window" && key == "L") m.L = num();
      else if (section == "window" && key == "L_a") m.L_a = num();
      else if (section == "window" && key == "h") m.h = num();
      else if (section == "trifurcation" && key == "r") m.r = num();
      else if (section == "trifurcation" && key == "lambda_y") m.lambda_y = num();
      else if (section == "trifurcation" && key == "lambda_z") m.lambda_z = num();
      else if (section == "run" && key == "seed") c.seed = detail::parse_u64(value);
      else if (section == "run" && key == "replicas") c.replicas = static_cast<int>(detail::parse_u64(value));
      else if (section == "run" && key == "threads") c.threads = static_cast<int>(detail::parse_u64(value));
      else if (section == "run" && key == "out") c.out = value;
      else if (section == "experiment" && key == "name") c.experiment = value;
      else if (section == "experiment") c.params[key] = value;
      else throw ConfigError(where(key) + ": unknown key");
    } catch (const InputError& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

// With scheduling = false the thread count and output directory are left
// out, so the echo is identical for every schedule of the same run.
inline void write_config(std::ostream& out, const RunConfig& c, bool scheduling = true) {
  using detail::format_double;
  const auto& m = c.model;
  out << "[model]\nspace = " << to_string(m.space) << "\nlambda = " << format_double(m.lambda)
      << "\nradius_law = " << m.radius_law << "\n\n[window]\nL = " << format_double(m.L)
      << "\nL_a = " << format_double(m.L_a) << "\nh = " << format_double(m.h) << "\n\n[trifurcation]\nr = "
      << format_double(m.r) << "\nlambda_y = " << format_double(m.lambda_y)
      << "\nlambda_z = " << format_double(m.lambda_z) << "\n\n[run]\nseed = " << c.seed
      << "\nreplicas = " << c.replicas << "\n";
  if (scheduling) out << "threads = " << c.threads << "\nout = " << c.out << "\n";
  if (!c.experiment.empty() || !c.params.empty()) {
    out << "\n[experiment]\n";
    if (!c.experiment.empty()) out << "name = " << c.experiment << "\n";
    for (const auto& [k, v] : c.params) out << k << " = " << v << "\n";
  }
}

inline std::string config_text(const RunConfig& c, bool scheduling = true) {
  std::ostringstream out;
  write_config(out, c, scheduling);
  return out.str();
}

// ---------------------------------------------------------------------------
// Seeded pipeline. Every replica draws from streams derived from
// (master seed, replica, purpose).

inline PointMeasure sample_model(const ModelConfig& m, std::uint64_t seed, std::uint64_t replica) {
  Rng rng = Rng::stream(seed, replica, "omega");
  return sample_poisson(Space(m.space), m.L_a, m.halo(), m.lambda, m.law(), rng);
}

inline Scene build_scene(const ModelConfig& m, const PointMeasure& omega) {
  return Scene::build(omega, m.L, m.L_a, m.h, m.law().min_radius());
}

inline Scene sample_scene(const ModelConfig& m, std::uint64_t seed, std::uint64_t replica) {
  return build_scene(m, sample_model(m, seed, replica));
}

// Auxiliary unmarked process on B(0, L_a + 2r) so spacing tests near the
// analysis sphere see their neighbours.
inline PointMeasure sample_auxiliary(const ModelConfig& m, double intensity, std::uint64_t seed, std::uint64_t replica,
                                     std::string_view tag) {
  Rng rng = Rng::stream(seed, replica, tag);
  return sample_poisson(Space(m.space), m.L_a, 2.0 * m.r, intensity, RadiusLaw::constant(1.0), rng);
}

}  // namespace bperc
