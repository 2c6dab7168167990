#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "evfleet/config.hpp"
#include "evfleet/demand.hpp"
#include "evfleet/simulation.hpp"
#include "evfleet/traffic.hpp"

namespace fixtures {

using namespace evfleet;

// Reference cycle count that keeps the worst per-tick loss (a full pack,
// depth factor at its clamp) below 0.1 kWh, so fleets age without dying.
inline constexpr double kGentleNcref = 5.13e16;

// Zones 1..n on a line; every ordered pair is a direct point mass with
// duration |i - j| * step_h + base_h and distance |i - j| * step_km + base_km.
inline std::shared_ptr<const traffic::TrafficModel> line_traffic(int n, double step_h = 0.3, double step_km = 4.0,
                                                                 double base_h = 0.1, double base_km = 1.0) {
  std::vector<ZoneId> zones;
  std::map<std::pair<ZoneId, ZoneId>, traffic::TravelDistribution> direct;
  for (int i = 1; i <= n; ++i) zones.push_back(i);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const double d = std::abs(i - j);
      direct[{i, j}] = traffic::TravelDistribution::point({d * step_h + base_h, d * step_km + base_km});
    }
  }
  return std::make_shared<const traffic::TrafficModel>(traffic::TrafficModel::from_direct(zones, direct));
}

// Small world: zones 1..8, stations at zones 1 and 8 with the default
// ports and caps, synthetic Poisson demand.
inline SimConfig small_config(int vehicles, Tick horizon, double rate_per_hour = 6.0, std::uint64_t seed = 1) {
  SimConfig c;
  c.fleet.size = vehicles;
  c.horizon_ticks = horizon;
  c.seed = seed;
  c.stations = {{1, 10, 50.0, 500.0, 0.9}, {8, 10, 50.0, 500.0, 0.9}};
  demand::PoissonSpec p;
  p.rate_per_hour = rate_per_hour;
  p.zones = {1, 2, 3, 4, 5, 6, 7, 8};
  p.hours = static_cast<double>(horizon) * c.tick_hours;
  p.seed = seed + 100;
  c.demand.synthetic = p;
  return c;
}

inline demand::JobStream stream_for(const SimConfig& c, std::vector<TripRecord> records) {
  demand::StreamOptions o;
  o.tick_hours = c.tick_hours;
  o.origin = c.demand.synthetic ? c.demand.synthetic->start_time : std::int64_t{1546300800};
  return demand::JobStream::from_records(std::move(records), o);
}

inline demand::JobStream synthetic_stream(const SimConfig& c) {
  return stream_for(c, demand::generate_poisson_trips(*c.demand.synthetic));
}

inline TripRecord trip(std::int64_t pickup, double hours, ZoneId from, ZoneId to, double km, double fare) {
  TripRecord r;
  r.pickup_time = pickup;
  r.dropoff_time = pickup + static_cast<std::int64_t>(std::llround(hours * 3600.0));
  r.pickup_zone = from;
  r.dropoff_zone = to;
  r.distance_km = km;
  r.fare = fare;
  return r;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("evfleet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
