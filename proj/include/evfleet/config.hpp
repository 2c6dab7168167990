#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "evfleet/battery.hpp"
#include "evfleet/demand.hpp"
#include "evfleet/grid.hpp"
#include "evfleet/reward.hpp"
#include "evfleet/traffic.hpp"
#include "evfleet/types.hpp"

namespace evfleet {

inline constexpr int kConfigSchemaVersion = 1;

enum class RetirementMode { Keep, Retire };

struct FleetSpec {
  int size = 50;
  double initial_capacity_kwh = 71.7;
  double efficiency_kwh_per_km = 0.171;
  // Battery-side C-rate limit. Unset: the first station's port cap
  // expressed at the battery (port_max * efficiency / initial capacity).
  std::optional<double> max_c_rate;
  // Unset: station zones, assigned round-robin.
  std::vector<ZoneId> depot_zones;
};

struct BatteryConfig {
  bool aging_enabled = true;
  battery::AgingConstants constants;
  // Exogenous battery temperature, cycled by tick index.
  std::vector<double> temperature_profile_k{298.15};
};

struct TrafficConfig {
  std::string dataset;  // fit source; empty means the demand dataset
  std::string cache;    // optional cache file
  traffic::FitOptions fit;
  traffic::SampleOptions sample;
};

struct DemandConfig {
  std::string dataset;
  demand::ColumnMapping columns;
  std::optional<std::int64_t> origin;
  std::optional<std::set<ZoneId>> zone_filter;
  // Replaces the dataset with generated trips when set.
  std::optional<demand::PoissonSpec> synthetic;
};

struct SimConfig {
  double tick_hours = 1.0;
  Tick horizon_ticks = 5 * 365 * 24;
  std::uint64_t seed = 1;
  double job_timeout_hours = 1.0;
  double recovery_hours = 24.0;
  double retirement_soh = 0.8;
  RetirementMode mode = RetirementMode::Keep;
  FleetSpec fleet;
  std::vector<grid::StationSpec> stations{{1, 10, 50.0, 500.0, 0.9}, {208, 10, 50.0, 500.0, 0.9}};
  BatteryConfig battery;
  TrafficConfig traffic;
  DemandConfig demand;
  policy::RewardConfig reward;
  double histogram_bin_kw = 10.0;
  bool audit = true;  // self-check invariants after every tick

  double max_c_rate() const;
  std::vector<ZoneId> depot_zones() const;
  Tick recovery_ticks() const;
};

// Throws ConfigError with the offending key.
SimConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
SimConfig load_config(const std::string& path);
nlohmann::json to_json(const SimConfig& config);
void validate_config(const SimConfig& config);

// Hash of the canonical JSON form.
std::string config_hash(const SimConfig& config);

const char* to_string(RetirementMode mode);
RetirementMode parse_mode(const std::string& text);

}  // namespace evfleet
