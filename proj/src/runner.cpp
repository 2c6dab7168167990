#include "evfleet/runner.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "evfleet/util.hpp"

namespace evfleet {

namespace {

std::string records_hash(const std::vector<TripRecord>& records) {
  Fnv1a h;
  for (const auto& r : records) {
    const std::string row = std::to_string(r.pickup_time) + ',' + std::to_string(r.dropoff_time) + ',' +
                            std::to_string(r.pickup_zone) + ',' + std::to_string(r.dropoff_zone) + ',' +
                            format_double(r.distance_km) + ',' + format_double(r.fare) + '\n';
    h.update(row);
  }
  return h.hex();
}

std::string traffic_key(const SimConfig& config, const std::string& source_hash) {
  auto j = to_json(config)["traffic"];
  j.erase("dataset");
  j.erase("cache");
  std::vector<ZoneId> extra;
  for (const auto& s : config.stations) extra.push_back(s.zone);
  for (ZoneId z : config.depot_zones()) extra.push_back(z);
  return to_hex(hash_bytes(source_hash + "|" + j.dump() + "|" + nlohmann::json(extra).dump()));
}

traffic::FitOptions fit_options(const SimConfig& config) {
  traffic::FitOptions options = config.traffic.fit;
  for (const auto& s : config.stations) options.extra_zones.push_back(s.zone);
  for (ZoneId z : config.depot_zones()) options.extra_zones.push_back(z);
  return options;
}

void report_fit(std::ostream* log, const traffic::TrafficModel& model) {
  if (!log) return;
  const auto& s = model.stats();
  *log << "traffic: " << model.zones().size() << " zones, " << s.direct_pairs << " direct pairs, "
       << s.composite_pairs << " composite pairs, " << s.sparse_pairs << " sparse pairs, " << s.records_seen
       << " records (" << s.records_filtered << " filtered)\n";
}

}  // namespace

World prepare_world(const SimConfig& config, std::ostream* log) {
  World world;
  std::string traffic_source_hash;
  const bool synthetic = config.demand.synthetic.has_value();
  if (synthetic) {
    world.synthetic = demand::generate_poisson_trips(*config.demand.synthetic);
    world.dataset_hash = records_hash(world.synthetic);
  } else {
    if (config.demand.dataset.empty()) throw ConfigError("demand.dataset is required without demand.synthetic");
    world.dataset_hash = to_hex(hash_file(config.demand.dataset));
  }

  const std::string traffic_path = config.traffic.dataset.empty() ? config.demand.dataset : config.traffic.dataset;
  const bool traffic_from_synthetic = config.traffic.dataset.empty() && synthetic;
  traffic_source_hash = traffic_from_synthetic ? world.dataset_hash
                        : traffic_path == config.demand.dataset ? world.dataset_hash
                                                                 : to_hex(hash_file(traffic_path));
  world.traffic_key = traffic_key(config, traffic_source_hash);

  const std::string& cache = config.traffic.cache;
  if (!cache.empty() && std::filesystem::exists(cache)) {
    std::ifstream in(cache);
    try {
      auto [model, key] = traffic::TrafficModel::load(in);
      if (key == world.traffic_key) {
        model.set_sample_options(config.traffic.sample);
        world.traffic = std::make_shared<traffic::TrafficModel>(std::move(model));
        world.cache_hit = true;
        if (log) *log << "traffic: cache hit " << cache << '\n';
        return world;
      }
      if (log) *log << "traffic: cache " << cache << " is stale, refitting\n";
    } catch (const std::exception& e) {
      if (log) *log << "traffic: ignoring unreadable cache " << cache << " (" << e.what() << ")\n";
    }
  }

  traffic::TrafficModel model;
  if (traffic_from_synthetic) {
    model = traffic::fit_from_trips(world.synthetic, fit_options(config));
  } else {
    traffic::TrafficFitter fitter(fit_options(config));
    demand::TripReader reader(traffic_path, config.demand.columns);
    TripRecord r;
    while (reader.next(r)) fitter.add(r);
    if (log && reader.malformed()) *log << "traffic: skipped " << reader.malformed() << " malformed rows\n";
    model = fitter.finish();
  }
  model.set_sample_options(config.traffic.sample);
  report_fit(log, model);
  if (!cache.empty()) {
    std::ofstream out(cache);
    if (!out) throw ConfigError("cannot write traffic cache " + cache);
    model.save(out, world.traffic_key);
    if (log) *log << "traffic: wrote cache " << cache << '\n';
  }
  world.traffic = std::make_shared<traffic::TrafficModel>(std::move(model));
  return world;
}

demand::JobStream make_job_stream(const SimConfig& config, const World& world) {
  demand::StreamOptions options;
  options.tick_hours = config.tick_hours;
  options.origin = config.demand.origin;
  options.zone_filter = config.demand.zone_filter;
  if (config.demand.synthetic) {
    if (!options.origin) options.origin = config.demand.synthetic->start_time;
    return demand::JobStream::from_records(world.synthetic, options);
  }
  return demand::JobStream::from_file(config.demand.dataset, config.demand.columns, options);
}

RunResult run(const SimConfig& config, policy::Policy& policy, const World& world, std::ostream* log,
              const RunHooks& hooks) {
  sim::Simulation simulation(config, world.traffic, make_job_stream(config, world));
  RunResult result{metrics::MetricsBundle(config.histogram_bin_kw), {}};
  result.info.config_hash = config_hash(config);
  result.info.dataset_hash = world.dataset_hash;
  result.info.traffic_hash = world.traffic_key;
  result.info.seed = config.seed;
  result.info.policy = policy.name();
  result.info.mode = to_string(config.mode);
  result.info.fleet_size = static_cast<std::size_t>(config.fleet.size);
  bool exhausted_logged = false;
  for (Tick t = 0; t < config.horizon_ticks; ++t) {
    const auto report = simulation.tick(policy.decide(simulation.snapshot()));
    if (hooks.on_tick) hooks.on_tick(simulation, report);
    result.metrics.record(simulation.snapshot(), report);
    if (log && !exhausted_logged && simulation.job_stream().exhausted() && t + 1 < config.horizon_ticks) {
      *log << "demand: dataset exhausted at tick " << t << ", continuing without new jobs\n";
      exhausted_logged = true;
    }
  }
  return result;
}

}  // namespace evfleet
