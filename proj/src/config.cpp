#include "evfleet/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "evfleet/util.hpp"

namespace evfleet {

namespace {

using nlohmann::json;

// Rejects keys outside `allowed` so that typos fail loudly.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + where + "." + key + "': " + e.what());
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

demand::TimeFormat parse_time_format(const std::string& s) {
  if (s == "iso") return demand::TimeFormat::Iso;
  if (s == "us12") return demand::TimeFormat::UsMeridiem;
  if (s == "unix") return demand::TimeFormat::UnixSeconds;
  throw ConfigError("demand.columns.time_format must be iso, us12 or unix (got '" + s + "')");
}

const char* time_format_name(demand::TimeFormat f) {
  switch (f) {
    case demand::TimeFormat::Iso: return "iso";
    case demand::TimeFormat::UsMeridiem: return "us12";
    case demand::TimeFormat::UnixSeconds: return "unix";
  }
  return "iso";
}

std::int64_t parse_timestamp(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<std::int64_t>();
  if (v.is_string()) {
    if (auto t = demand::parse_time(v.get<std::string>(), demand::TimeFormat::Iso)) return *t;
  }
  throw ConfigError(where + " must be epoch seconds or 'YYYY-MM-DD HH:MM:SS'");
}

}  // namespace

const char* to_string(RetirementMode mode) { return mode == RetirementMode::Retire ? "retire" : "keep"; }

RetirementMode parse_mode(const std::string& text) {
  if (text == "keep") return RetirementMode::Keep;
  if (text == "retire") return RetirementMode::Retire;
  throw ConfigError("mode must be 'keep' or 'retire' (got '" + text + "')");
}

double SimConfig::max_c_rate() const {
  if (fleet.max_c_rate) return *fleet.max_c_rate;
  if (stations.empty()) return 1.0;
  const auto& s = stations.front();
  return s.port_max_kw * s.efficiency / fleet.initial_capacity_kwh;
}

std::vector<ZoneId> SimConfig::depot_zones() const {
  std::vector<ZoneId> out;
  const std::size_t n = static_cast<std::size_t>(fleet.size);
  for (std::size_t i = 0; i < n; ++i) {
    if (!fleet.depot_zones.empty()) {
      out.push_back(fleet.depot_zones[i % fleet.depot_zones.size()]);
    } else {
      out.push_back(stations[i % stations.size()].zone);
    }
  }
  return out;
}

Tick SimConfig::recovery_ticks() const {
  return static_cast<Tick>(std::ceil(recovery_hours / tick_hours - 1e-9));
}

SimConfig parse_config(const json& j, const std::string& base_dir) {
  check_keys(j, "config",
             {"schema_version", "tick_hours", "horizon_ticks", "seed", "job_timeout_hours", "recovery_hours",
              "retirement_soh", "mode", "fleet", "stations", "battery", "traffic", "demand", "reward",
              "histogram_bin_kw", "audit", "description"});
  const int version = j.value("schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version));
  }
  SimConfig c;
  read(j, "tick_hours", c.tick_hours, "config");
  read(j, "horizon_ticks", c.horizon_ticks, "config");
  read(j, "seed", c.seed, "config");
  read(j, "job_timeout_hours", c.job_timeout_hours, "config");
  read(j, "recovery_hours", c.recovery_hours, "config");
  read(j, "retirement_soh", c.retirement_soh, "config");
  read(j, "histogram_bin_kw", c.histogram_bin_kw, "config");
  read(j, "audit", c.audit, "config");
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());

  if (j.contains("fleet")) {
    const auto& f = j.at("fleet");
    check_keys(f, "fleet", {"size", "initial_capacity_kwh", "efficiency_kwh_per_km", "max_c_rate", "depot_zones"});
    read(f, "size", c.fleet.size, "fleet");
    read(f, "initial_capacity_kwh", c.fleet.initial_capacity_kwh, "fleet");
    read(f, "efficiency_kwh_per_km", c.fleet.efficiency_kwh_per_km, "fleet");
    if (f.contains("max_c_rate") && !f.at("max_c_rate").is_null()) c.fleet.max_c_rate = f.at("max_c_rate").get<double>();
    read(f, "depot_zones", c.fleet.depot_zones, "fleet");
  }

  if (j.contains("stations")) {
    c.stations.clear();
    for (const auto& s : j.at("stations")) {
      check_keys(s, "stations[]", {"zone", "ports", "port_max_kw", "station_max_kw", "efficiency"});
      grid::StationSpec spec;
      read(s, "zone", spec.zone, "stations[]");
      read(s, "ports", spec.ports, "stations[]");
      read(s, "port_max_kw", spec.port_max_kw, "stations[]");
      read(s, "station_max_kw", spec.station_max_kw, "stations[]");
      read(s, "efficiency", spec.efficiency, "stations[]");
      c.stations.push_back(spec);
    }
  }

  if (j.contains("battery")) {
    const auto& b = j.at("battery");
    check_keys(b, "battery", {"aging_enabled", "n_cref", "t_ref_k", "soc_clamp", "temperature_profile_k", "stages"});
    read(b, "aging_enabled", c.battery.aging_enabled, "battery");
    read(b, "n_cref", c.battery.constants.n_cref, "battery");
    read(b, "t_ref_k", c.battery.constants.t_ref_k, "battery");
    read(b, "soc_clamp", c.battery.constants.soc_clamp, "battery");
    read(b, "temperature_profile_k", c.battery.temperature_profile_k, "battery");
    if (b.contains("stages")) {
      const auto& st = b.at("stages");
      if (!st.is_array() || st.size() != 3) throw ConfigError("battery.stages must list exactly 3 stages");
      for (std::size_t i = 0; i < 3; ++i) {
        check_keys(st[i], "battery.stages[]", {"alpha", "beta", "psi", "soh_lower", "soh_upper"});
        auto& p = c.battery.constants.stages[i];
        read(st[i], "alpha", p.alpha, "battery.stages[]");
        read(st[i], "beta", p.beta, "battery.stages[]");
        read(st[i], "psi", p.psi, "battery.stages[]");
        read(st[i], "soh_lower", p.soh_lower, "battery.stages[]");
        read(st[i], "soh_upper", p.soh_upper, "battery.stages[]");
      }
    }
  }

  if (j.contains("traffic")) {
    const auto& t = j.at("traffic");
    check_keys(t, "traffic",
               {"dataset", "cache", "min_pair_count", "bandwidth_scale", "max_samples_per_pair", "intra_zone_fallback",
                "resample_retries", "min_duration_h", "min_distance_km", "fit_seed"});
    read(t, "dataset", c.traffic.dataset, "traffic");
    read(t, "cache", c.traffic.cache, "traffic");
    read(t, "min_pair_count", c.traffic.fit.min_pair_count, "traffic");
    read(t, "bandwidth_scale", c.traffic.fit.bandwidth_scale, "traffic");
    read(t, "max_samples_per_pair", c.traffic.fit.max_samples_per_pair, "traffic");
    read(t, "fit_seed", c.traffic.fit.seed, "traffic");
    if (t.contains("intra_zone_fallback")) {
      const auto& fb = t.at("intra_zone_fallback");
      check_keys(fb, "traffic.intra_zone_fallback", {"duration_h", "distance_km"});
      read(fb, "duration_h", c.traffic.fit.intra_zone_fallback.duration_h, "traffic.intra_zone_fallback");
      read(fb, "distance_km", c.traffic.fit.intra_zone_fallback.distance_km, "traffic.intra_zone_fallback");
    }
    read(t, "resample_retries", c.traffic.sample.retries, "traffic");
    read(t, "min_duration_h", c.traffic.sample.min_duration_h, "traffic");
    read(t, "min_distance_km", c.traffic.sample.min_distance_km, "traffic");
  }
  c.traffic.dataset = resolve(base_dir, c.traffic.dataset);
  c.traffic.cache = resolve(base_dir, c.traffic.cache);

  if (j.contains("demand")) {
    const auto& d = j.at("demand");
    check_keys(d, "demand", {"dataset", "columns", "origin", "zone_filter", "synthetic"});
    read(d, "dataset", c.demand.dataset, "demand");
    if (d.contains("columns")) {
      const auto& m = d.at("columns");
      check_keys(m, "demand.columns",
                 {"pickup_time", "dropoff_time", "pickup_zone", "dropoff_zone", "distance", "fare", "delimiter",
                  "time_format", "distance_scale"});
      auto& cols = c.demand.columns;
      read(m, "pickup_time", cols.pickup_time, "demand.columns");
      read(m, "dropoff_time", cols.dropoff_time, "demand.columns");
      read(m, "pickup_zone", cols.pickup_zone, "demand.columns");
      read(m, "dropoff_zone", cols.dropoff_zone, "demand.columns");
      read(m, "distance", cols.distance, "demand.columns");
      read(m, "fare", cols.fare, "demand.columns");
      read(m, "distance_scale", cols.distance_scale, "demand.columns");
      if (m.contains("delimiter")) {
        const auto delim = m.at("delimiter").get<std::string>();
        if (delim.size() != 1) throw ConfigError("demand.columns.delimiter must be one character");
        cols.delimiter = delim[0];
      }
      if (m.contains("time_format")) cols.time_format = parse_time_format(m.at("time_format").get<std::string>());
    }
    if (d.contains("origin") && !d.at("origin").is_null()) c.demand.origin = parse_timestamp(d.at("origin"), "demand.origin");
    if (d.contains("zone_filter") && !d.at("zone_filter").is_null()) {
      auto zones = d.at("zone_filter").get<std::vector<ZoneId>>();
      c.demand.zone_filter = std::set<ZoneId>(zones.begin(), zones.end());
    }
    if (d.contains("synthetic") && !d.at("synthetic").is_null()) {
      const auto& s = d.at("synthetic");
      check_keys(s, "demand.synthetic",
                 {"rate_per_hour", "zones", "start_time", "hours", "zone_spacing_km", "speed_kmh", "base_fare",
                  "fare_per_km", "seed"});
      demand::PoissonSpec p;
      p.hours = static_cast<double>(c.horizon_ticks) * c.tick_hours;
      read(s, "rate_per_hour", p.rate_per_hour, "demand.synthetic");
      read(s, "zones", p.zones, "demand.synthetic");
      if (s.contains("start_time")) p.start_time = parse_timestamp(s.at("start_time"), "demand.synthetic.start_time");
      read(s, "hours", p.hours, "demand.synthetic");
      read(s, "zone_spacing_km", p.zone_spacing_km, "demand.synthetic");
      read(s, "speed_kmh", p.speed_kmh, "demand.synthetic");
      read(s, "base_fare", p.base_fare, "demand.synthetic");
      read(s, "fare_per_km", p.fare_per_km, "demand.synthetic");
      read(s, "seed", p.seed, "demand.synthetic");
      c.demand.synthetic = p;
    }
  }
  c.demand.dataset = resolve(base_dir, c.demand.dataset);

  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    check_keys(r, "reward", {"lambda", "delta_kw", "penalty_weight"});
    read(r, "lambda", c.reward.lambda, "reward");
    read(r, "delta_kw", c.reward.delta_kw, "reward");
    read(r, "penalty_weight", c.reward.penalty_weight, "reward");
  }

  validate_config(c);
  return c;
}

void validate_config(const SimConfig& c) {
  if (!(c.tick_hours > 0.0)) throw ConfigError("tick_hours must be positive");
  if (c.horizon_ticks < 0) throw ConfigError("horizon_ticks must be non-negative");
  if (!(c.job_timeout_hours > 0.0)) throw ConfigError("job_timeout_hours must be positive");
  if (!(c.recovery_hours > 0.0)) throw ConfigError("recovery_hours must be positive");
  if (!(c.retirement_soh >= 0.0 && c.retirement_soh <= 1.0)) throw ConfigError("retirement_soh must be in [0, 1]");
  if (c.fleet.size <= 0) throw ConfigError("fleet.size must be positive");
  if (!(c.fleet.initial_capacity_kwh > 0.0)) throw ConfigError("fleet.initial_capacity_kwh must be positive");
  if (!(c.fleet.efficiency_kwh_per_km >= 0.0)) throw ConfigError("fleet.efficiency_kwh_per_km must be >= 0");
  if (c.fleet.max_c_rate && !(*c.fleet.max_c_rate >= 0.0)) throw ConfigError("fleet.max_c_rate must be >= 0");
  if (c.stations.empty()) throw ConfigError("at least one station is required");
  for (const auto& s : c.stations) {
    if (s.ports <= 0) throw ConfigError("stations[].ports must be positive");
    if (!(s.port_max_kw > 0.0) || !(s.station_max_kw > 0.0)) throw ConfigError("station power caps must be positive");
    if (!(s.efficiency > 0.0 && s.efficiency <= 1.0)) throw ConfigError("stations[].efficiency must be in (0, 1]");
  }
  const auto& k = c.battery.constants;
  if (!(k.n_cref > 0.0)) throw ConfigError("battery.n_cref must be positive");
  if (!(k.t_ref_k > 0.0)) throw ConfigError("battery.t_ref_k must be positive");
  if (!(k.soc_clamp > 0.0 && k.soc_clamp <= 1.0)) throw ConfigError("battery.soc_clamp must be in (0, 1]");
  for (const auto& st : k.stages) {
    if (!(st.alpha > 0.0)) throw ConfigError("battery.stages[].alpha must be positive");
    if (st.beta == 0.0) throw ConfigError("battery.stages[].beta must be non-zero");
  }
  if (c.battery.temperature_profile_k.empty()) throw ConfigError("battery.temperature_profile_k must not be empty");
  for (double t : c.battery.temperature_profile_k) {
    if (!(t > 0.0)) throw ConfigError("battery temperatures must be positive Kelvin");
  }
  if (!c.demand.synthetic && c.demand.dataset.empty()) throw ConfigError("demand.dataset or demand.synthetic is required");
  if (c.demand.synthetic && c.demand.synthetic->zones.empty()) throw ConfigError("demand.synthetic.zones must not be empty");
  if (c.reward.lambda < 0.0 || c.reward.delta_kw < 0.0 || c.reward.penalty_weight < 0.0) {
    throw ConfigError("reward parameters must be non-negative");
  }
  if (!(c.histogram_bin_kw > 0.0)) throw ConfigError("histogram_bin_kw must be positive");
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  const auto base = std::filesystem::absolute(path).parent_path().string();
  return parse_config(j, base);
}

json to_json(const SimConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["tick_hours"] = c.tick_hours;
  j["horizon_ticks"] = c.horizon_ticks;
  j["seed"] = c.seed;
  j["job_timeout_hours"] = c.job_timeout_hours;
  j["recovery_hours"] = c.recovery_hours;
  j["retirement_soh"] = c.retirement_soh;
  j["mode"] = to_string(c.mode);
  j["histogram_bin_kw"] = c.histogram_bin_kw;
  j["audit"] = c.audit;
  j["fleet"] = {{"size", c.fleet.size},
                {"initial_capacity_kwh", c.fleet.initial_capacity_kwh},
                {"efficiency_kwh_per_km", c.fleet.efficiency_kwh_per_km},
                {"max_c_rate", c.max_c_rate()},
                {"depot_zones", c.fleet.depot_zones}};
  auto& st = j["stations"] = json::array();
  for (const auto& s : c.stations) {
    st.push_back({{"zone", s.zone},
                  {"ports", s.ports},
                  {"port_max_kw", s.port_max_kw},
                  {"station_max_kw", s.station_max_kw},
                  {"efficiency", s.efficiency}});
  }
  json stages = json::array();
  for (const auto& p : c.battery.constants.stages) {
    stages.push_back({{"alpha", p.alpha}, {"beta", p.beta}, {"psi", p.psi}, {"soh_lower", p.soh_lower}, {"soh_upper", p.soh_upper}});
  }
  j["battery"] = {{"aging_enabled", c.battery.aging_enabled},
                  {"n_cref", c.battery.constants.n_cref},
                  {"t_ref_k", c.battery.constants.t_ref_k},
                  {"soc_clamp", c.battery.constants.soc_clamp},
                  {"temperature_profile_k", c.battery.temperature_profile_k},
                  {"stages", stages}};
  j["traffic"] = {{"dataset", c.traffic.dataset},
                  {"cache", c.traffic.cache},
                  {"min_pair_count", c.traffic.fit.min_pair_count},
                  {"bandwidth_scale", c.traffic.fit.bandwidth_scale},
                  {"max_samples_per_pair", c.traffic.fit.max_samples_per_pair},
                  {"fit_seed", c.traffic.fit.seed},
                  {"intra_zone_fallback",
                   {{"duration_h", c.traffic.fit.intra_zone_fallback.duration_h},
                    {"distance_km", c.traffic.fit.intra_zone_fallback.distance_km}}},
                  {"resample_retries", c.traffic.sample.retries},
                  {"min_duration_h", c.traffic.sample.min_duration_h},
                  {"min_distance_km", c.traffic.sample.min_distance_km}};
  const auto& cols = c.demand.columns;
  json demand = {{"dataset", c.demand.dataset},
                 {"columns",
                  {{"pickup_time", cols.pickup_time},
                   {"dropoff_time", cols.dropoff_time},
                   {"pickup_zone", cols.pickup_zone},
                   {"dropoff_zone", cols.dropoff_zone},
                   {"distance", cols.distance},
                   {"fare", cols.fare},
                   {"delimiter", std::string(1, cols.delimiter)},
                   {"time_format", time_format_name(cols.time_format)},
                   {"distance_scale", cols.distance_scale}}}};
  if (c.demand.origin) demand["origin"] = *c.demand.origin;
  if (c.demand.zone_filter) demand["zone_filter"] = std::vector<ZoneId>(c.demand.zone_filter->begin(), c.demand.zone_filter->end());
  if (c.demand.synthetic) {
    const auto& p = *c.demand.synthetic;
    demand["synthetic"] = {{"rate_per_hour", p.rate_per_hour}, {"zones", p.zones},
                           {"start_time", p.start_time},       {"hours", p.hours},
                           {"zone_spacing_km", p.zone_spacing_km}, {"speed_kmh", p.speed_kmh},
                           {"base_fare", p.base_fare},         {"fare_per_km", p.fare_per_km},
                           {"seed", p.seed}};
  }
  j["demand"] = demand;
  j["reward"] = {{"lambda", c.reward.lambda}, {"delta_kw", c.reward.delta_kw}, {"penalty_weight", c.reward.penalty_weight}};
  return j;
}

std::string config_hash(const SimConfig& config) { return to_hex(hash_bytes(to_json(config).dump())); }

}  // namespace evfleet
