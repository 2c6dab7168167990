#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "evfleet/env.hpp"
#include "evfleet/policy.hpp"

namespace evfleet::env {

FleetEnv::FleetEnv(SimConfig config, World world) : config_(std::move(config)), world_(std::move(world)) {
  validate_config(config_);
}

Observation FleetEnv::reset(const ResetOptions& options) {
  if (options.episode_length <= 0) throw std::invalid_argument("episode_length must be positive");
  if (!(options.start_hours >= 0.0) || !std::isfinite(options.start_hours)) {
    throw std::invalid_argument("start_hours must be a finite non-negative number");
  }
  std::vector<double> capacities;
  const bool persist = options.persist_fleet && sim_;
  if (persist) {
    for (const auto& v : sim_->vehicles()) capacities.push_back(v.battery.capacity);
  }

  SimConfig config = config_;
  config.seed = options.seed;
  config.horizon_ticks = options.episode_length;
  if (options.start_hours > 0.0) {
    const std::int64_t base = config.demand.origin ? *config.demand.origin : make_job_stream(config, world_).origin();
    config.demand.origin = base + static_cast<std::int64_t>(std::llround(options.start_hours * 3600.0));
  }
  sim_ = std::make_unique<sim::Simulation>(config, world_.traffic, make_job_stream(config, world_),
                                           persist ? &capacities : nullptr);
  steps_ = 0;
  episode_length_ = options.episode_length;
  return observe(0.0, {});
}

Observation FleetEnv::step(const std::vector<double>& decisions, const std::vector<double>& rates) {
  if (!sim_) throw std::logic_error("step before reset");
  if (done()) throw std::logic_error("episode is over; send reset");
  const auto schedule = policy::route_actions(sim_->snapshot(), decisions, rates);
  const auto report = sim_->tick(schedule);
  ++steps_;
  const policy::TickOutcome outcome{report.completions, report.capacity_loss_kwh, report.grid_power_kw};
  const auto terms = policy::reward_terms(outcome, config_.reward);
  return observe(policy::reward_step(outcome, config_.reward), terms);
}

Observation FleetEnv::observe(double reward, const policy::RewardTerms& terms) const {
  Observation o;
  o.tick = sim_->now();
  o.steps = steps_;
  for (const auto& v : sim_->vehicles()) {
    const double soh = v.battery.soh();
    const double soc = v.battery.soc_fraction();
    o.soh.push_back(soh);
    o.soc.push_back(soc);
    o.obs.push_back(soh);
    o.obs.push_back(soc);
  }
  o.reward = reward;
  o.terms = terms;
  o.done = done();
  return o;
}

nlohmann::json to_json(const Observation& o) {
  nlohmann::ordered_json j;
  j["type"] = "observation";
  j["tick"] = o.tick;
  j["steps"] = o.steps;
  j["soh"] = o.soh;
  j["soc"] = o.soc;
  j["obs"] = o.obs;
  j["reward"] = o.reward;
  j["reward_terms"] = {{"completions", o.terms.completions},
                       {"degradation", o.terms.degradation},
                       {"power_penalty", o.terms.power_penalty}};
  j["done"] = o.done;
  return j;
}

Session::Session(FleetEnv env) : env_(std::make_unique<FleetEnv>(std::move(env))) {}

namespace {

nlohmann::ordered_json error_reply(const std::string& message) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["message"] = message;
  return j;
}

std::vector<double> number_array(const nlohmann::json& request, const char* key) {
  if (!request.contains(key) || !request[key].is_array()) {
    throw std::invalid_argument(std::string("step needs an array '") + key + "'");
  }
  std::vector<double> out;
  for (const auto& x : request[key]) {
    if (!x.is_number()) throw std::invalid_argument(std::string("'") + key + "' must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

nlohmann::json Session::dispatch(const nlohmann::json& request) {
  if (!request.is_object() || !request.contains("type") || !request["type"].is_string()) {
    throw std::invalid_argument("message must be an object with a string 'type'");
  }
  if (request.contains("version") && request["version"] != kProtocolVersion) {
    throw std::invalid_argument("unsupported protocol version; this server speaks " +
                                std::to_string(kProtocolVersion));
  }
  const std::string type = request["type"];
  static const std::set<std::string> known{"hello", "reset", "step", "close"};
  if (!known.count(type)) throw std::invalid_argument("unknown message type '" + type + "'");

  if (type == "hello") {
    nlohmann::ordered_json j;
    j["type"] = "hello";
    j["protocol"] = "evfleet-env";
    j["version"] = kProtocolVersion;
    j["num_vehicles"] = env_->num_vehicles();
    j["episode_length"] = kDefaultEpisodeLength;
    j["max_c_rate"] = env_->config().max_c_rate();
    j["tick_hours"] = env_->config().tick_hours;
    return j;
  }
  if (type == "close") {
    closed_ = true;
    return {{"type", "closed"}};
  }
  if (type == "reset") {
    for (const auto& [key, value] : request.items()) {
      static const std::set<std::string> allowed{"type", "version", "seed", "episode_length", "persist_fleet",
                                                 "start_hours", "config"};
      if (!allowed.count(key)) throw std::invalid_argument("unknown reset field '" + key + "'");
    }
    if (request.contains("config")) {
      if (!request["config"].is_string()) throw std::invalid_argument("field 'config' must be a path");
      SimConfig config = load_config(request["config"].get<std::string>());
      World world = prepare_world(config);
      env_ = std::make_unique<FleetEnv>(std::move(config), std::move(world));
    }
    ResetOptions options;
    options.seed = field_or<std::uint64_t>(request, "seed", env_->config().seed);
    options.episode_length = field_or<Tick>(request, "episode_length", kDefaultEpisodeLength);
    options.persist_fleet = field_or<bool>(request, "persist_fleet", false);
    options.start_hours = field_or<double>(request, "start_hours", 0.0);
    return to_json(env_->reset(options));
  }
  // step
  const auto decisions = number_array(request, "decisions");
  const auto rates = number_array(request, "rates");
  return to_json(env_->step(decisions, rates));
}

std::string Session::handle(const std::string& line) {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    return error_reply(std::string("malformed message: ") + e.what()).dump();
  }
  try {
    return dispatch(request).dump();
  } catch (const InvariantViolation&) {
    throw;
  } catch (const std::exception& e) {
    return error_reply(e.what()).dump();
  }
}

void serve_stream(Session& session, std::istream& in, std::ostream& out) {
  std::string line;
  while (!session.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out << session.handle(line) << '\n';
    out.flush();
  }
}

std::optional<int> parse_endpoint(const std::string& endpoint) {
  if (endpoint == "stdio") return std::nullopt;
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string digits = endpoint.substr(4);
    if (!digits.empty() && digits.size() <= 5 && digits.find_first_not_of("0123456789") == std::string::npos) {
      const int port = std::stoi(digits);
      if (port >= 0 && port <= 65535) return port;
    }
  }
  throw std::invalid_argument("endpoint must be 'stdio' or 'tcp:PORT', got '" + endpoint + "'");
}

}  // namespace evfleet::env
