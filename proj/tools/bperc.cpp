// bperc: command-line front end.
//
//   bperc sample     --config run.cfg
//   bperc scene      --config run.cfg --replicas 8 --threads 4
//   bperc forest     --config run.cfg
//   bperc walk       --config run.cfg
//   bperc experiment pivotal|indist|monotone|connectivity|percolation|transience --config run.cfg
//
// Exit status: 0 ok, 2 invalid configuration, 3 invariant violation,
// 4 bad input, 1 anything else.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "bperc/commands.hpp"

using namespace bperc;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas, threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config,-c", o.config, "configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--replicas", o.replicas, "number of replicas");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--out", o.out, "output directory");
}

RunConfig load(const Overrides& o) {
  RunConfig c;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot open " + o.config);
    try {
      c = parse_config(in);
    } catch (const ConfigError& e) {
      throw ConfigError(o.config + ": " + e.what());
    }
  }
  if (o.seed) c.seed = *o.seed;
  if (o.replicas) c.replicas = *o.replicas;
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.out = *o.out;
  validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boolean percolation simulation toolkit"};
  app.require_subcommand(1);
  Overrides o;
  std::string experiment;
  auto* sample = app.add_subcommand("sample", "sample the marked Poisson process");
  auto* scene = app.add_subcommand("scene", "build scenes and label components");
  auto* forest = app.add_subcommand("forest", "detect trifurcations and build forests");
  auto* walk = app.add_subcommand("walk", "two-sided walk stationarity diagnostics");
  auto* exp = app.add_subcommand("experiment", "run a named experiment");
  exp->add_option("name", experiment, "experiment name")->required()->check(CLI::IsMember(experiment_names()));
  for (auto* s : {sample, scene, forest, walk, exp}) add_common(s, o);
  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig c = load(o);
    RunOutput out = sample->parsed()   ? run_sample(c)
                    : scene->parsed()  ? run_scene(c)
                    : forest->parsed() ? run_forest(c)
                    : walk->parsed()   ? run_walk(c)
                                       : run_experiment(c, experiment);
    out.write(c.out);
    std::cout << c.out << "/manifest.json\n";
    return 0;
  } catch (...) {
    return failure_status(std::current_exception(), std::cerr);
  }
}
