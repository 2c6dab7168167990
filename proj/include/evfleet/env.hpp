#pragma once

// Episodic environment over the simulator and its line protocol.
//
// Every message is one JSON object per line with a "type" field.
//   -> {"type":"hello"}
//   <- {"type":"hello","protocol":"evfleet-env","version":1,"num_vehicles":N,...}
//   -> {"type":"reset","seed":7,"episode_length":168,"persist_fleet":false,
//       "start_hours":0,"config":"path/optional.json"}
//   <- {"type":"observation","tick":0,"soh":[...],"soc":[...],"obs":[...],
//       "reward":0,"done":false,"steps":0}
//   -> {"type":"step","decisions":[...N],"rates":[...N]}
//   <- observation as above, reward of the tick just simulated
//   -> {"type":"close"}
//   <- {"type":"closed"}
// Failures reply {"type":"error","message":"..."} and keep the session open.
// Rates are battery-side C-rates; values outside [0, max_c_rate] are clipped.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evfleet/config.hpp"
#include "evfleet/reward.hpp"
#include "evfleet/runner.hpp"
#include "evfleet/simulation.hpp"

namespace evfleet::env {

inline constexpr int kProtocolVersion = 1;
inline constexpr Tick kDefaultEpisodeLength = 168;

struct ResetOptions {
  std::uint64_t seed = 1;
  Tick episode_length = kDefaultEpisodeLength;
  bool persist_fleet = false;  // carry battery capacities over from the previous episode
  double start_hours = 0.0;    // skip this much demand past the dataset start
};

struct Observation {
  Tick tick = 0;
  Tick steps = 0;
  std::vector<double> soh;
  std::vector<double> soc;  // fraction of current capacity
  std::vector<double> obs;  // interleaved (soh, soc) per vehicle, the network input
  double reward = 0.0;
  policy::RewardTerms terms;
  bool done = false;
};

class FleetEnv {
 public:
  FleetEnv(SimConfig config, World world);

  Observation reset(const ResetOptions& options);
  // Throws std::logic_error before the first reset or after the episode
  // ended; std::invalid_argument for malformed action arrays.
  Observation step(const std::vector<double>& decisions, const std::vector<double>& rates);

  int num_vehicles() const { return config_.fleet.size; }
  const SimConfig& config() const { return config_; }
  const sim::Simulation* simulation() const { return sim_.get(); }
  bool done() const { return sim_ && steps_ >= episode_length_; }

 private:
  Observation observe(double reward, const policy::RewardTerms& terms) const;

  SimConfig config_;
  World world_;
  std::unique_ptr<sim::Simulation> sim_;
  Tick steps_ = 0;
  Tick episode_length_ = kDefaultEpisodeLength;
};

nlohmann::json to_json(const Observation& observation);

// One protocol session. handle() maps a request line to a reply line.
class Session {
 public:
  explicit Session(FleetEnv env);
  std::string handle(const std::string& line);
  bool closed() const { return closed_; }
  FleetEnv& env() { return *env_; }

 private:
  nlohmann::json dispatch(const nlohmann::json& request);

  std::unique_ptr<FleetEnv> env_;
  bool closed_ = false;
};

// Runs a session until a close message or end of input.
void serve_stream(Session& session, std::istream& in, std::ostream& out);

// Listens on 127.0.0.1:port, serves one connection, then returns.
// Throws std::runtime_error on socket failures.
void serve_tcp(Session& session, int port, std::ostream* log = nullptr);

// "stdio" or "tcp:PORT"; nullopt port means stdio. Throws
// std::invalid_argument for anything else.
std::optional<int> parse_endpoint(const std::string& endpoint);

}  // namespace evfleet::env
