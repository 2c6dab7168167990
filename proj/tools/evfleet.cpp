// Command-line driver: run simulations, fit traffic caches, serve the
// environment protocol, render plots and create weight files.

#include <CLI11.hpp>

#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "evfleet/config.hpp"
#include "evfleet/env.hpp"
#include "evfleet/metrics.hpp"
#include "evfleet/plot.hpp"
#include "evfleet/policy.hpp"
#include "evfleet/runner.hpp"
#include "evfleet/weights.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kInvariant = 3 };

struct Options {
  std::string config;
  std::string policy = "baseline";
  std::string weights;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string serve;
  bool fit = false;
  std::string dataset;
  std::string cache;
};

int cmd_fit(evfleet::SimConfig config, const Options& opt) {
  if (!opt.dataset.empty()) config.traffic.dataset = opt.dataset;
  if (!opt.cache.empty()) config.traffic.cache = opt.cache;
  if (config.traffic.cache.empty()) {
    std::cerr << "error: --fit needs a cache path (--cache or traffic.cache)\n";
    return kUsage;
  }
  const auto world = evfleet::prepare_world(config, &std::cerr);
  const auto& model = *world.traffic;
  std::cout << "zones " << model.zones().size() << "\n"
            << "direct_pairs " << model.stats().direct_pairs << "\n"
            << "composite_pairs " << model.stats().composite_pairs << "\n"
            << "sparse_pairs " << model.stats().sparse_pairs << "\n"
            << "cache " << config.traffic.cache << (world.cache_hit ? " (hit)" : " (written)") << "\n";
  return kOk;
}

int cmd_serve(const evfleet::SimConfig& config, const Options& opt) {
  std::optional<int> port;
  try {
    port = evfleet::env::parse_endpoint(opt.serve);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  evfleet::env::Session session(evfleet::env::FleetEnv(config, evfleet::prepare_world(config, &std::cerr)));
  if (port) {
    evfleet::env::serve_tcp(session, *port, &std::cerr);
  } else {
    std::ios::sync_with_stdio(false);
    evfleet::env::serve_stream(session, std::cin, std::cout);
  }
  return kOk;
}

int cmd_run(const evfleet::SimConfig& config, const Options& opt) {
  std::unique_ptr<evfleet::policy::Policy> policy;
  if (opt.policy == "baseline") {
    policy = std::make_unique<evfleet::policy::BaselinePolicy>();
  } else {
    if (opt.weights.empty()) {
      std::cerr << "error: --policy neural needs --weights\n";
      return kUsage;
    }
    policy = std::make_unique<evfleet::policy::NeuralPolicy>(evfleet::policy::load_weights(opt.weights),
                                                             config.fleet.size);
  }
  const auto world = evfleet::prepare_world(config, &std::cerr);
  auto result = evfleet::run(config, *policy, world, &std::cerr);
  result.info.seed_overridden = opt.seed.has_value();
  evfleet::metrics::export_bundle(result.metrics, result.info, opt.out);
  std::cout << evfleet::metrics::summary(result.metrics, result.info).dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electric taxi fleet simulator"};
  app.set_version_flag("--version", "evfleet 1.0");
  Options opt;
  app.add_option("--config", opt.config, "simulation config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--policy", opt.policy, "charging policy")->check(CLI::IsMember({"baseline", "neural"}));
  app.add_option("--weights", opt.weights, "weight file for the neural policy");
  app.add_option("--out", opt.out, "metrics output directory");
  app.add_option("--seed", opt.seed, "override the config seed");
  app.add_option("--mode", opt.mode, "retirement mode")->check(CLI::IsMember({"keep", "retire"}));
  app.add_option("--serve", opt.serve, "serve the environment protocol on stdio or tcp:PORT");
  app.add_flag("--fit", opt.fit, "fit the traffic model and write the cache, then exit");
  app.add_option("--dataset", opt.dataset, "trip file for --fit (defaults to the config)");
  app.add_option("--cache", opt.cache, "cache path for --fit (defaults to the config)");

  std::string metrics_dir, plot_dir = "plots";
  auto* plot = app.add_subcommand("plot", "render SVG figures from a metrics directory");
  plot->add_option("--metrics", metrics_dir, "metrics directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", plot_dir, "figure directory");

  int vehicles = 0;
  std::uint64_t weight_seed = 0;
  std::string weight_path;
  bool zeros = false;
  auto* init = app.add_subcommand("init-weights", "write a freshly initialised network");
  init->add_option("--vehicles", vehicles, "fleet size")->required()->check(CLI::PositiveNumber);
  init->add_option("--seed", weight_seed, "initialisation seed");
  init->add_option("--out", weight_path, "output path (.txt for the text format)")->required();
  init->add_flag("--zeros", zeros, "all weights and biases zero");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*plot) {
      for (const auto& path : evfleet::plot::render(metrics_dir, plot_dir)) std::cout << path << "\n";
      return kOk;
    }
    if (*init) {
      const auto w = zeros ? evfleet::policy::PolicyWeights::zeros(vehicles)
                           : evfleet::policy::PolicyWeights::random(vehicles, weight_seed);
      evfleet::policy::save_weights(weight_path, w);
      std::cout << weight_path << "\n";
      return kOk;
    }
    if (opt.config.empty()) {
      std::cerr << "error: --config is required\n" << app.help();
      return kUsage;
    }
    auto config = evfleet::load_config(opt.config);
    if (opt.seed) config.seed = *opt.seed;
    if (!opt.mode.empty()) config.mode = evfleet::parse_mode(opt.mode);
    if (opt.fit) return cmd_fit(config, opt);
    if (!opt.serve.empty()) return cmd_serve(config, opt);
    return cmd_run(config, opt);
  } catch (const evfleet::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
