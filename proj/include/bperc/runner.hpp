#pragma once

// Replica orchestration and artifact bookkeeping: a bounded worker pool that
// merges results in replica order, SHA-256 content hashes, the JSON
// manifest, and the generated data dictionary for CSV tables.
//
// Needs OpenSSL's libcrypto at link time.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bperc/config.hpp"
#include "bperc/errors.hpp"

namespace bperc {

// f(i) for i in [0, n) on up to `threads` workers. Results come back in index
// order; if any call throws, the exception of the lowest index is rethrown
// after all workers have stopped, so failures are schedule-independent too.
template <class F>
auto parallel_map(std::size_t n, int threads, F&& f) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using T = std::invoke_result_t<F&, std::size_t>;
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (k <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: EVP_Digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data dictionary. Every CSV table the tools emit is described here; the
// dictionary written next to a run lists only the tables that run produced.

struct ColumnDoc {
  std::string column, description;
};

inline const std::map<std::string, std::vector<ColumnDoc>>& table_docs() {
  static const std::map<std::string, std::vector<ColumnDoc>> docs = {
      {"atoms.csv",
       {{"replica", "replica index"},
        {"atoms", "atoms in the sampled window including the halo"},
        {"analysis_atoms", "atoms centered in B(0, L_a)"}}},
      {"scenes.csv",
       {{"replica", "replica index"},
        {"scene_hash", "64-bit hash of the point measure and raster parameters"},
        {"cells", "raster cells"},
        {"occupied_fraction", "fraction of analysis-region volume that is occupied"},
        {"occupied_components", "occupied components meeting the analysis region"},
        {"vacant_components", "vacant components meeting the analysis region"}}},
      {"components.csv",
       {{"replica", "replica index"},
        {"phase", "occupied or vacant"},
        {"component_id", "component label within the scene"},
        {"cell_count", "raster cells in the component"},
        {"volume", "summed cell volume"},
        {"boundary", "1 if the component reaches the analysis sphere"}}},
      {"forest_vertices.csv",
       {{"replica", "replica index"},
        {"vertex", "trifurcation index within the replica"},
        {"x", "first chart coordinate"},
        {"y", "second chart coordinate"},
        {"label", "auxiliary-process mark"},
        {"branches", "local-component pieces after removal"},
        {"boundary_branches", "pieces reaching the analysis sphere"},
        {"degree", "forest degree"},
        {"interior_complete", "1 if every boundary branch found a partner"}}},
      {"forest_edges.csv",
       {{"replica", "replica index"},
        {"a", "lower vertex index"},
        {"b", "upper vertex index"},
        {"label", "64-bit edge label"},
        {"branch_a", "branch of a containing b"},
        {"branch_b", "branch of b containing a"}}},
      {"forest_checks.csv",
       {{"replica", "replica index"},
        {"vertices", "trifurcations"},
        {"edges", "undirected forest edges"},
        {"acyclic", "1 if the forest has no cycle"},
        {"complete_vertices_full", "1 if interior-complete vertices have one out-edge per boundary branch"},
        {"one_out_edge_per_branch", "1 if no (vertex, branch) has two out-edges"}}},
      {"stationarity.csv",
       {{"n", "time index of the two-sided walk (negative: backward)"},
        {"observable", "observable name"},
        {"bin", "observable value"},
        {"count", "accepted walks with that value at time n"}}},
      {"stationarity_tv.csv",
       {{"m", "first time index"}, {"n", "second time index"}, {"tv", "total variation between the two histograms"}}},
      {"pivotal_occupied.csv",
       {{"replica", "replica index"},
        {"z", "index of the candidate point"},
        {"x", "first chart coordinate"},
        {"y", "second chart coordinate"},
        {"eligible", "1 if no atom is centered within delta"},
        {"samples", "insertions drawn"},
        {"flips", "insertions that flipped the property of C_O(0)"},
        {"fraction", "flips / samples"},
        {"pivotal", "1 if fraction > 0"}}},
      {"pivotal_vacant.csv",
       {{"replica", "replica index"},
        {"z", "index of the candidate point"},
        {"x", "first chart coordinate"},
        {"y", "second chart coordinate"},
        {"deleted", "atoms removed"},
        {"flipped", "1 if the property of C_V(0) flipped"}}},
      {"indistinguishability.csv",
       {{"seed", "replica index"},
        {"component_id", "component label within the scene"},
        {"cell_count", "raster cells in the component"},
        {"boundary", "1 if the component reaches the analysis sphere"},
        {"property_value", "property evaluated on the component"}}},
      {"indistinguishability_strata.csv",
       {{"min_cell_count", "stratum: components with at least this many cells"},
        {"mixed_rate", "fraction of seeds with both property values"}}},
      {"monotone.csv",
       {{"replica", "replica index"},
        {"L_a", "analysis radius"},
        {"inclusion_failures", "cells occupied at lambda1 but not at lambda2"},
        {"crossing1", "crossing components at lambda1"},
        {"crossing2", "crossing components at lambda2"},
        {"violation", "1 if unique at the smaller-set level and not at the other"}}},
      {"decay.csv",
       {{"t", "distance from the origin"},
        {"tau_hat", "fraction of seeds with 0 and x_t in one component"},
        {"ci_lo", "95% Wilson lower bound"},
        {"ci_hi", "95% Wilson upper bound"},
        {"n_seeds", "seeds"}}},
      {"percolation.csv",
       {{"lambda", "intensity of the in-component process"},
        {"percolates_fraction", "fraction of tested components that percolate"},
        {"L_a", "analysis radius"}}},
      {"percolation_seeds.csv",
       {{"replica", "replica index"},
        {"component_id", "tested component"},
        {"lambda_star", "smallest grid intensity that percolates (empty if none)"},
        {"vertices", "vertices at the top of the grid"},
        {"edges", "edges at the top of the grid"}}},
      {"transience.csv",
       {{"replica", "replica index"},
        {"balls", "balls centered in B(0, L_a)"},
        {"tree_edges", "edges of the minimal spanning forest"},
        {"backbone", "backbone vertices"},
        {"roots", "flow roots (D >= 3)"},
        {"max_e1", "largest first-generation energy"},
        {"max_energy", "largest flow energy"},
        {"max_kirchhoff", "largest relative Kirchhoff defect"},
        {"incoming", "largest mass entering a vertex from other roots' flows"}}},
  };
  return docs;
}

// ---------------------------------------------------------------------------
// Artifacts and manifest.

class RunOutput {
 public:
  RunOutput(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

  void add(const std::string& path, std::string content) {
    for (auto& [p, c] : files_)
      if (p == path) throw InvariantError("artifact-unique-path", path);
    files_.emplace_back(path, std::move(content));
  }
  // The reference is invalidated by the next add() or table().
  std::string& table(const std::string& path) {
    for (auto& [p, c] : files_)
      if (p == path) return c;
    files_.emplace_back(path, std::string{});
    return files_.back().second;
  }
  nlohmann::ordered_json& summary() { return summary_; }

  std::string data_dictionary() const {
    std::string out = "table,column,description\n";
    for (const auto& [p, c] : files_) {
      auto it = table_docs().find(p);
      if (it == table_docs().end()) continue;
      for (const auto& d : it->second) out += p + "," + d.column + ",\"" + d.description + "\"\n";
    }
    return out;
  }

  std::string manifest() const {
    nlohmann::ordered_json m;
    m["format"] = "bperc-manifest-1";
    m["command"] = command_;
    m["seed"] = cfg_.seed;
    m["replicas"] = cfg_.replicas;
    m["config"] = config_text(cfg_, false);
    auto& arts = m["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& [p, c] : files_) arts.push_back({{"path", p}, {"bytes", c.size()}, {"sha256", sha256_hex(c)}});
    m["summary"] = summary_.is_null() ? nlohmann::ordered_json::object() : summary_;
    return m.dump(2) + "\n";
  }

  // Writes every artifact, data_dictionary.csv and manifest.json under dir.
  // The manifest lists the dictionary but not itself.
  void write(const std::filesystem::path& dir) {
    if (std::none_of(files_.begin(), files_.end(), [](const auto& f) { return f.first == "data_dictionary.csv"; }))
      add("data_dictionary.csv", data_dictionary());
    std::filesystem::create_directories(dir);
    for (const auto& [p, c] : files_) put(dir / p, c);
    put(dir / "manifest.json", manifest());
  }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  static void put(const std::filesystem::path& p, const std::string& c) {
    std::ofstream f(p, std::ios::binary);
    f << c;
    if (!f) throw std::runtime_error("cannot write " + p.string());
  }

  std::string command_;
  RunConfig cfg_;
  std::vector<std::pair<std::string, std::string>> files_;
  nlohmann::ordered_json summary_;
};

}  // namespace bperc
