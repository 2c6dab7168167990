#pragma once

// Experiment driver: builds the traffic model and job source for a config,
// then runs the tick loop with a policy and records metrics.

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "evfleet/config.hpp"
#include "evfleet/metrics.hpp"
#include "evfleet/policy.hpp"
#include "evfleet/simulation.hpp"
#include "evfleet/traffic.hpp"

namespace evfleet {

struct World {
  std::shared_ptr<const traffic::TrafficModel> traffic;
  std::string dataset_hash;            // demand source content
  std::string traffic_key;             // traffic source content plus fit options
  std::vector<TripRecord> synthetic;   // generated demand, when configured
  bool cache_hit = false;
};

// Fits the traffic model, or loads it from the configured cache when the
// cache was built from the same data and fit options. A fresh fit is written
// back to the cache path. Throws ConfigError, IngestError or FitError.
World prepare_world(const SimConfig& config, std::ostream* log = nullptr);

demand::JobStream make_job_stream(const SimConfig& config, const World& world);

struct RunHooks {
  // Called after every tick, before metrics are recorded.
  std::function<void(const sim::Simulation&, const sim::TickReport&)> on_tick;
};

struct RunResult {
  metrics::MetricsBundle metrics;
  metrics::RunInfo info;
};

RunResult run(const SimConfig& config, policy::Policy& policy, const World& world, std::ostream* log = nullptr,
              const RunHooks& hooks = {});

}  // namespace evfleet
