#pragma once

// Charge-scheduling policies. A policy sees a Snapshot at the start of each
// tick and returns a Schedule; it never reads fares.

#include <memory>
#include <string>
#include <vector>

#include "evfleet/simulation.hpp"
#include "evfleet/weights.hpp"

namespace evfleet::policy {

using sim::Schedule;
using sim::Snapshot;

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Schedule decide(const Snapshot& snapshot) = 0;
  virtual std::string name() const = 0;
};

// Station with the least expected travel time from zone; ties go to the
// lower station id.
StationId nearest_station(const Snapshot& snapshot, ZoneId zone);

// Highest battery-side rate the vehicle may request at the station: its own
// limit and the port limit.
double max_feasible_rate(const sim::VehicleView& vehicle, const grid::Station& station);

// Greedy nearest-first matching of the given vehicles to ARRIVED jobs by
// expected pickup time; ties by vehicle id, then job id. Appends ServeJob
// actions; with idle_unmatched, vehicles left over get an Idle action.
void match_nearest(const Snapshot& snapshot, const std::vector<VehicleId>& pool, Schedule& out,
                   bool idle_unmatched);

// 80-20 rule: charge IDLE vehicles at or below `low` of capacity at full
// rate, release CHARGING vehicles at or above `high`.
class BaselinePolicy : public Policy {
 public:
  explicit BaselinePolicy(double low = 0.2, double high = 0.8);
  Schedule decide(const Snapshot& snapshot) override;
  std::string name() const override { return "baseline"; }

 private:
  double low_;
  double high_;
};

// Network input: per vehicle (soh, soc fraction), in vehicle id order.
std::vector<double> observation(const Snapshot& snapshot);

// Raw network output, interleaved (decision, rate fraction) per vehicle.
std::vector<double> forward(const PolicyWeights& weights, const std::vector<double>& input);

inline constexpr double kDecisionThreshold = 0.5;

// Turns per-vehicle charge decisions and battery-side rates into a schedule.
// decision >= 0.5 sends the vehicle to charge at its current station, or the
// nearest one, preempting anything but a trip with a passenger aboard; the
// rate is clipped to the vehicle limit, the port limit and, for vehicles
// already on a port, the station headroom. Otherwise a charging vehicle is
// released and IDLE ones are matched to demand.
Schedule route_actions(const Snapshot& snapshot, const std::vector<double>& decisions,
                       const std::vector<double>& rates);

class NeuralPolicy : public Policy {
 public:
  // Throws ConfigError when the weights do not fit the fleet size.
  NeuralPolicy(PolicyWeights weights, int num_vehicles);
  Schedule decide(const Snapshot& snapshot) override;
  std::string name() const override { return "neural"; }
  const PolicyWeights& weights() const { return weights_; }

 private:
  PolicyWeights weights_;
};

}  // namespace evfleet::policy
