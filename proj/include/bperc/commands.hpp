#pragma once

// One driver per CLI subcommand. Each fans replicas out over the worker
// pool, merges per-replica table fragments in replica order, and returns the
// artifacts; nothing here touches the filesystem.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bperc/config.hpp"
#include "bperc/errors.hpp"
#include "bperc/experiments.hpp"
#include "bperc/forest.hpp"
#include "bperc/runner.hpp"
#include "bperc/scene.hpp"
#include "bperc/walks.hpp"

namespace bperc {

namespace detail {

inline std::string csv_num(double v) { return format_double(v); }

inline std::size_t replicas_of(const RunConfig& c) { return static_cast<std::size_t>(c.replicas); }

// Pieces of one replica's tables, merged later in replica order.
using Fragments = std::vector<std::string>;

inline void merge(RunOutput& out, const std::vector<std::string>& names, const std::vector<std::string>& headers,
                  const std::vector<Fragments>& parts) {
  for (std::size_t t = 0; t < names.size(); ++t) {
    std::string& tab = out.table(names[t]);
    tab = headers[t];
    for (const auto& p : parts) tab += p[t];
  }
}

inline Phase phase_param(const RunConfig& c) { return parse_phase(c.get("phase", "occupied")); }

}  // namespace detail

// Property by name: boundary | cells:N | frequency:T | frequency-median |
// trifurcation. A fresh instance per job keeps the memo tables unshared.
inline ComponentProperty make_property(const RunConfig& c, std::uint64_t replica) {
  const std::string name = c.get("property", "boundary");
  const int walks = static_cast<int>(c.number("frequency_walks", 20));
  const int steps = static_cast<int>(c.number("frequency_steps", 2000));
  if (name == "boundary") return boundary_contact();
  if (name == "frequency-median") return frequency_above_median(walks, steps, c.seed);
  if (name == "trifurcation")
    return contains_trifurcation(c.model.r, sample_auxiliary(c.model, c.model.lambda_y, c.seed, replica, "y"));
  if (name == "component-id-even") return component_id_even();
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    const std::string head = name.substr(0, colon), arg = name.substr(colon + 1);
    try {
      if (head == "cells") return cell_count_at_least(static_cast<std::size_t>(detail::parse_u64(arg)));
      if (head == "frequency") return frequency_at_least(detail::parse_double(arg), walks, steps, c.seed);
    } catch (const InputError& e) {
      throw ConfigError("[experiment] property: " + std::string(e.what()));
    }
  }
  throw ConfigError("[experiment] property: unknown property '" + name + "'");
}

// ---------------------------------------------------------------------------

inline RunOutput run_sample(const RunConfig& c) {
  RunOutput out("sample", c);
  const auto& m = c.model;
  const Space sp(m.space);
  auto parts = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    const auto omega = sample_model(m, c.seed, r);
    std::ostringstream pm;
    write_point_measure(pm, omega);
    const auto inside = omega.count_in_ball(sp.origin(), m.L_a);
    return std::pair{pm.str(), std::to_string(r) + ',' + std::to_string(omega.size()) + ',' + std::to_string(inside) + '\n'};
  });
  out.add("config.txt", config_text(c, false));
  std::string atoms = "replica,atoms,analysis_atoms\n";
  for (std::size_t r = 0; r < parts.size(); ++r) {
    out.add("omega_" + std::to_string(r) + ".txt", parts[r].first);
    atoms += parts[r].second;
  }
  out.add("atoms.csv", std::move(atoms));
  return out;
}

inline RunOutput run_scene(const RunConfig& c) {
  RunOutput out("scene", c);
  const bool raster = c.number("raster", 0) != 0;
  auto parts = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    const Scene s = sample_scene(c.model, c.seed, r);
    const std::string rs = std::to_string(r);
    std::string comps;
    for (Phase p : {Phase::Occupied, Phase::Vacant})
      for (const auto& k : s.components(p)) {
        if (!k.in_analysis) continue;
        comps += rs + ',' + std::string(to_string(p)) + ',' + std::to_string(k.id) + ',' + std::to_string(k.cells) + ',' +
                 detail::csv_num(k.volume) + ',' + (k.boundary ? "1" : "0") + '\n';
      }
    const std::string row = rs + ',' + std::to_string(s.hash()) + ',' + std::to_string(s.grid().size()) + ',' +
                            detail::csv_num(s.occupied_fraction(s.analysis_radius())) + ',' +
                            std::to_string(s.analysis_components(Phase::Occupied).size()) + ',' +
                            std::to_string(s.analysis_components(Phase::Vacant).size()) + '\n';
    std::string rle;
    if (raster) {
      std::ostringstream o;
      s.write_raster_rle(o);
      rle = o.str();
    }
    return detail::Fragments{row, comps, rle};
  });
  detail::merge(out, {"scenes.csv", "components.csv"},
                {"replica,scene_hash,cells,occupied_fraction,occupied_components,vacant_components\n",
                 "replica,phase,component_id,cell_count,volume,boundary\n"},
                parts);
  if (raster)
    for (std::size_t r = 0; r < parts.size(); ++r) out.add("raster_" + std::to_string(r) + ".rle", parts[r][2]);
  return out;
}

// ---------------------------------------------------------------------------
// Forests.

struct ReplicaForest {
  TrifurcationForest forest;
  ForestCheck check;
};

inline ReplicaForest replica_forest(const ModelConfig& m, std::uint64_t seed, std::uint64_t replica, Phase phase) {
  if (!(m.r > 0.0)) throw ConfigError("[trifurcation] r: must be positive for forest construction");
  const Scene s = sample_scene(m, seed, replica);
  const PointMeasure Y = sample_auxiliary(m, m.lambda_y, seed, replica, "y");
  ReplicaForest rf;
  rf.forest = build_forest(s, find_trifurcations(s, Y, m.r, phase), phase);
  rf.check = check_forest(rf.forest);
  return rf;
}

inline void require_forest(const ForestCheck& k, std::size_t replica) {
  const std::string where = "replica " + std::to_string(replica);
  if (!k.acyclic) throw InvariantError("forest-acyclic", where);
  if (!k.one_out_edge_per_branch) throw InvariantError("forest-one-edge-per-branch", where);
  if (!k.complete_vertices_full) throw InvariantError("forest-complete-vertex-degree", where);
  if (!k.branch_exchange) throw InvariantError("forest-branch-exchange", where);
  if (!k.degree_bounded) throw InvariantError("forest-degree-bound", where);
}

inline RunOutput run_forest(const RunConfig& c) {
  RunOutput out("forest", c);
  const Phase phase = detail::phase_param(c);
  auto parts = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    const auto rf = replica_forest(c.model, c.seed, r, phase);
    require_forest(rf.check, r);
    const auto& f = rf.forest;
    const std::string rs = std::to_string(r);
    std::string verts, edges;
    for (std::size_t v = 0; v < f.size(); ++v) {
      const auto& t = f.vertices[v];
      verts += rs + ',' + std::to_string(v) + ',' + detail::csv_num(t.point.x[0]) + ',' + detail::csv_num(t.point.x[1]) +
               ',' + detail::csv_num(t.label) + ',' + std::to_string(t.branches.size()) + ',' +
               std::to_string(t.boundary_branches()) + ',' + std::to_string(f.degree(static_cast<int>(v))) + ',' +
               (f.interior_complete[v] ? "1" : "0") + '\n';
    }
    for (const auto& e : f.edges)
      edges += rs + ',' + std::to_string(e.a) + ',' + std::to_string(e.b) + ',' + std::to_string(e.label) + ',' +
               std::to_string(e.branch_a) + ',' + std::to_string(e.branch_b) + '\n';
    const std::string check = rs + ',' + std::to_string(f.size()) + ',' + std::to_string(f.edges.size()) + ",1,1,1\n";
    return detail::Fragments{verts, edges, check};
  });
  detail::merge(out, {"forest_vertices.csv", "forest_edges.csv", "forest_checks.csv"},
                {"replica,vertex,x,y,label,branches,boundary_branches,degree,interior_complete\n",
                 "replica,a,b,label,branch_a,branch_b\n",
                 "replica,vertices,edges,acyclic,complete_vertices_full,one_out_edge_per_branch\n"},
                parts);
  return out;
}

inline RunOutput run_walk(const RunConfig& c) {
  RunOutput out("walk", c);
  const Phase phase = detail::phase_param(c);
  const Space sp(c.model.space);
  auto graphs = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    const auto rf = replica_forest(c.model, c.seed, r, phase);
    require_forest(rf.check, r);
    return WalkGraph::from_forest(sp, rf.forest);
  });
  StationarityOptions opt;
  opt.n_max = static_cast<int>(c.number("n_max", 10));
  opt.anchor_radius = c.number("anchor_radius", c.model.L_a + 1.0);
  opt.anchor_intensity = c.number("anchor_intensity", 1.0);
  opt.max_weight = static_cast<int>(c.number("max_weight", 8));
  const auto res = stationarity_diagnostic(graphs, opt, degree_observable, Rng::stream(c.seed, 0, "walk"));
  std::ostringstream st;
  write_stationarity_csv(st, res, "degree");
  out.add("stationarity.csv", st.str());
  std::string tv = "m,n,tv\n";
  for (std::size_t a = 0; a < res.tv_matrix.size(); ++a)
    for (std::size_t b = a + 1; b < res.tv_matrix.size(); ++b)
      tv += std::to_string(a) + ',' + std::to_string(b) + ',' + detail::csv_num(res.tv_matrix[a][b]) + '\n';
  out.add("stationarity_tv.csv", tv);
  // A few two-sided walks from anchors at the vertices, for inspection.
  const int traces = static_cast<int>(c.number("traces", 10));
  std::ostringstream wj;
  Rng tr = Rng::stream(c.seed, 0, "traces");
  int written = 0;
  for (std::size_t r = 0; r < graphs.size() && written < traces; ++r)
    for (std::size_t v = 0; v < graphs[r].size() && written < traces; ++v)
      if (const auto w = two_sided_walk(graphs[r], graphs[r].points[v], opt.n_max, tr)) {
        wj << "{\"replica\":" << r << ",\"walk\":";
        std::ostringstream one;
        write_walk_jsonl(one, *w);
        std::string line = one.str();
        if (!line.empty() && line.back() == '\n') line.pop_back();
        wj << line << "}\n";
        ++written;
      }
  out.add("walks.jsonl", wj.str());
  auto& sum = out.summary();
  sum["anchors"] = res.anchors;
  sum["accepted"] = res.accepted;
  sum["censored"] = res.censored;
  sum["tv_max"] = res.tv_max;
  sum["tv_reversal"] = res.tv_reversal;
  return out;
}

// ---------------------------------------------------------------------------
// Experiments.

inline RunOutput run_pivotal(const RunConfig& c) {
  const Phase phase = detail::phase_param(c);
  RunOutput out("experiment pivotal", c);
  std::optional<double> cap;
  if (c.has("radius_cap")) cap = c.number("radius_cap", 0);
  const double delta = c.number("delta", 0.5), Delta = c.number("Delta", 1.0);
  const int samples = static_cast<int>(c.number("samples", 20));
  auto parts = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    const Scene s = sample_scene(c.model, c.seed, r);
    std::string rows;
    if (!s.component_of(s.space().origin(), phase)) return rows;
    const auto prop = make_property(c, r);
    const PointMeasure Z = sample_auxiliary(c.model, c.model.lambda_z, c.seed, r, "z");
    const std::string rs = std::to_string(r);
    if (phase == Phase::Occupied) {
      for (const auto& p : pivotal_scan_occupied(s, prop, Z, delta, samples, Rng::stream(c.seed, r, "pivotal"), cap))
        rows += rs + ',' + std::to_string(p.z) + ',' + detail::csv_num(p.point.x[0]) + ',' +
                detail::csv_num(p.point.x[1]) + ',' + (p.eligible ? "1" : "0") + ',' + std::to_string(p.samples) + ',' +
                std::to_string(p.flips) + ',' + detail::csv_num(p.fraction) + ',' + (p.pivotal ? "1" : "0") + '\n';
    } else {
      for (const auto& p : pivotal_scan_vacant(s, prop, Z, Delta, cap))
        rows += rs + ',' + std::to_string(p.z) + ',' + detail::csv_num(p.point.x[0]) + ',' +
                detail::csv_num(p.point.x[1]) + ',' + std::to_string(p.deleted) + ',' + (p.flipped ? "1" : "0") + '\n';
    }
    return rows;
  });
  const bool occ = phase == Phase::Occupied;
  std::string tab = occ ? "replica,z,x,y,eligible,samples,flips,fraction,pivotal\n" : "replica,z,x,y,deleted,flipped\n";
  for (const auto& p : parts) tab += p;
  out.add(occ ? "pivotal_occupied.csv" : "pivotal_vacant.csv", std::move(tab));
  return out;
}

inline RunOutput run_indistinguishability(const RunConfig& c) {
  const Phase phase = detail::phase_param(c);
  RunOutput out("experiment indistinguishability", c);
  auto scenes = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) { return sample_scene(c.model, c.seed, r); });
  std::vector<SeededScene> ens;
  for (std::size_t r = 0; r < scenes.size(); ++r) ens.push_back({r, &scenes[r]});
  std::vector<std::size_t> strata;
  for (double v : c.numbers("strata", {})) strata.push_back(static_cast<std::size_t>(v));
  // One property instance for the whole ensemble; auxiliary-process
  // properties draw from the replica-0 stream.
  const auto res = indistinguishability(ens, make_property(c, 0), phase, strata);
  std::ostringstream csv;
  write_indist_csv(csv, res);
  out.add("indistinguishability.csv", csv.str());
  std::string st = "min_cell_count,mixed_rate\n";
  for (auto [k, rate] : res.stratified) st += std::to_string(k) + ',' + detail::csv_num(rate) + '\n';
  out.add("indistinguishability_strata.csv", st);
  auto& sum = out.summary();
  sum["seeds"] = res.seeds;
  sum["mixed"] = res.mixed;
  sum["mixed_rate"] = res.mixed_rate;
  sum["underpowered"] = res.underpowered;
  return out;
}

inline RunOutput run_monotone(const RunConfig& c) {
  const Phase phase = detail::phase_param(c);
  RunOutput out("experiment monotone", c);
  const double l1 = c.number("lambda1", c.model.lambda), l2 = c.number("lambda2", 2.0 * c.model.lambda);
  ModelConfig m2 = c.model;
  m2.lambda = l2;
  auto recs = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    auto rec = monotone_pair(sample_model(m2, c.seed, r), l1, l2, m2.L, m2.L_a, m2.h, phase);
    rec.replica = r;
    if (!rec.inclusion) throw InvariantError("thinning-inclusion", "replica " + std::to_string(r));
    return rec;
  });
  std::string tab = "replica,L_a,inclusion_failures,crossing1,crossing2,violation\n";
  int viol = 0;
  for (const auto& r : recs) {
    tab += std::to_string(r.replica) + ',' + detail::csv_num(r.L_a) + ',' + std::to_string(r.inclusion_failures) + ',' +
           std::to_string(r.crossing1) + ',' + std::to_string(r.crossing2) + ',' + (r.violation ? "1" : "0") + '\n';
    viol += r.violation;
  }
  out.add("monotone.csv", tab);
  out.summary()["violations"] = viol;
  out.summary()["violation_rate"] = recs.empty() ? 0.0 : static_cast<double>(viol) / static_cast<double>(recs.size());
  return out;
}

inline RunOutput run_connectivity(const RunConfig& c) {
  const Phase phase = detail::phase_param(c);
  RunOutput out("experiment connectivity", c);
  std::vector<double> def;
  for (double t = 0; t < c.model.L_a - 1e-9; t += 1.0) def.push_back(t);
  const auto grid = c.numbers("t", def);
  auto scenes = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) { return sample_scene(c.model, c.seed, r); });
  std::vector<SeededScene> ens;
  for (std::size_t r = 0; r < scenes.size(); ++r) ens.push_back({r, &scenes[r]});
  const auto res = connectivity_decay(ens, phase, grid, c.seed);
  std::ostringstream csv;
  write_decay_csv(csv, res);
  out.add("decay.csv", csv.str());
  out.summary()["boundary_from_origin"] = res.boundary_from_origin;
  return out;
}

// Tests the largest boundary-contacting component of each replica.
inline RunOutput run_percolation(const RunConfig& c) {
  const Phase phase = detail::phase_param(c);
  RunOutput out("experiment percolation", c);
  const auto grid = c.numbers("lambda_grid", {0.1, 0.2, 0.4, 0.8, 1.6, 3.2});
  if (grid.empty()) throw ConfigError("[experiment] lambda_grid: empty");
  const double top = *std::max_element(grid.begin(), grid.end());
  auto recs = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) -> std::optional<std::pair<int, PercolationResult>> {
    const Scene s = sample_scene(c.model, c.seed, r);
    int best = -1;
    for (int id : s.boundary_components(phase))
      if (best < 0 || s.component(phase, id).cells > s.component(phase, best).cells) best = id;
    if (best < 0) return std::nullopt;
    Rng rng = Rng::stream(c.seed, r, "eta");
    const PointMeasure eta = sample_poisson(s.space(), c.model.L_a, 0.0, top, RadiusLaw::constant(1.0), rng);
    return std::pair{best, percolation_on_component(s, phase, best, grid, eta)};
  });
  std::string seeds = "replica,component_id,lambda_star,vertices,edges\n";
  std::vector<int> perc(grid.size(), 0);
  int tested = 0;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    if (!recs[r]) continue;
    const auto& [id, p] = *recs[r];
    ++tested;
    for (std::size_t k = 0; k < grid.size(); ++k) perc[k] += p.percolates[k];
    seeds += std::to_string(r) + ',' + std::to_string(id) + ',' + (p.lambda_star ? detail::csv_num(*p.lambda_star) : "") +
             ',' + std::to_string(p.vertices) + ',' + std::to_string(p.edges) + '\n';
  }
  std::string tab = "lambda,percolates_fraction,L_a\n";
  for (std::size_t k = 0; k < grid.size(); ++k)
    tab += detail::csv_num(grid[k]) + ',' + detail::csv_num(tested ? static_cast<double>(perc[k]) / tested : 0.0) + ',' +
           detail::csv_num(c.model.L_a) + '\n';
  out.add("percolation.csv", tab);
  out.add("percolation_seeds.csv", seeds);
  out.summary()["tested"] = tested;
  return out;
}

inline RunOutput run_transience(const RunConfig& c) {
  RunOutput out("experiment transience", c);
  auto recs = parallel_map(detail::replicas_of(c), c.threads, [&](std::size_t r) {
    const auto rec = transience(sample_scene(c.model, c.seed, r));
    if (rec.max_kirchhoff > 1e-12) throw InvariantError("flow-kirchhoff", "replica " + std::to_string(r));
    return rec;
  });
  std::string tab = "replica,balls,tree_edges,backbone,roots,max_e1,max_energy,max_kirchhoff,incoming\n";
  double e1 = 0.0, inc = 0.0;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const auto& x = recs[r];
    tab += std::to_string(r) + ',' + std::to_string(x.balls) + ',' + std::to_string(x.tree_edges) + ',' +
           std::to_string(x.backbone) + ',' + std::to_string(x.roots) + ',' + detail::csv_num(x.max_e1) + ',' +
           detail::csv_num(x.max_energy) + ',' + detail::csv_num(x.max_kirchhoff) + ',' + detail::csv_num(x.incoming) +
           '\n';
    e1 = std::max(e1, x.max_e1);
    inc = std::max(inc, x.incoming);
  }
  out.add("transience.csv", tab);
  out.summary()["max_e1"] = e1;
  out.summary()["max_incoming"] = inc;
  return out;
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"pivotal",      "indist",      "indistinguishability", "monotone",
                                                 "connectivity", "percolation", "transience"};
  return names;
}

inline RunOutput run_experiment(const RunConfig& c, const std::string& name) {
  if (name == "pivotal") return run_pivotal(c);
  if (name == "indist" || name == "indistinguishability") return run_indistinguishability(c);
  if (name == "monotone") return run_monotone(c);
  if (name == "connectivity") return run_connectivity(c);
  if (name == "percolation") return run_percolation(c);
  if (name == "transience") return run_transience(c);
  throw ConfigError("[experiment] name: unknown experiment '" + name + "'");
}

// Exit status and a one-line diagnostic for a run that threw: 2 invalid
// configuration, 3 invariant violation (the message names the invariant),
// 4 bad input, 1 anything else.
inline int failure_status(std::exception_ptr e, std::ostream& err) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    err << "bperc: invalid configuration: " << x.what() << '\n';
    return 2;
  } catch (const InvariantError& x) {
    err << "bperc: " << x.what() << '\n';
    return 3;
  } catch (const InputError& x) {
    err << "bperc: bad input: " << x.what() << '\n';
    return 4;
  } catch (const std::exception& x) {
    err << "bperc: " << x.what() << '\n';
    return 1;
  }
}

}  // namespace bperc
