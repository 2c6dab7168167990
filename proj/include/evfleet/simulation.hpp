#pragma once

// Tick engine. Each call to Simulation::tick processes one interval of
// length tick_hours in a fixed order:
//   1. validate and apply the schedule (dispatch, preempt, start legs)
//   2. advance movement and discharge
//   3. deliver charging energy to attached vehicles
//   4. apply per-vehicle capacity loss
//   5. job lifecycle: failures, pickups, completions, charger arrivals, timeouts
//   6. recovery processing (and retirement in retire mode)
//   7. release new jobs
//   8. self-audit and emit events

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evfleet/battery.hpp"
#include "evfleet/config.hpp"
#include "evfleet/demand.hpp"
#include "evfleet/grid.hpp"
#include "evfleet/rng.hpp"
#include "evfleet/traffic.hpp"
#include "evfleet/types.hpp"

namespace evfleet::sim {

enum class VehicleState { Idle, ToPickup, InService, ToCharger, Charging, Recovery };
inline constexpr std::size_t kVehicleStateCount = 6;

const char* to_string(VehicleState state);
bool is_allowed_transition(VehicleState from, VehicleState to);
// States whose current task may be dropped by a new instruction.
bool is_preemptable(VehicleState state);

struct TravelLeg {
  ZoneId origin = 0;
  ZoneId destination = 0;
  double duration_h = 0.0;
  double distance_km = 0.0;
  double elapsed_h = 0.0;

  bool arrived() const { return elapsed_h >= duration_h; }
  double remaining_h() const { return duration_h > elapsed_h ? duration_h - elapsed_h : 0.0; }
};

struct Vehicle {
  VehicleId id = 0;
  VehicleState state = VehicleState::Idle;
  battery::BatteryState battery;
  ZoneId zone = 0;
  ZoneId depot_zone = 0;
  double efficiency_kwh_per_km = 0.171;
  double max_c_rate = 1.0;
  std::optional<TravelLeg> leg;
  std::optional<JobId> job;
  std::optional<StationId> station;  // target or current charging station
  double requested_c_rate = 0.0;     // battery side
  Tick charging_from = 0;            // first tick with energy delivery
  std::optional<Tick> recovery_until;
  bool crossed_retirement = false;
  bool retire_pending = false;
  bool retired = false;

  double pending_hours() const { return leg ? leg->remaining_h() : 0.0; }
};

// Per-vehicle energy account. At all times
//   soc = initial_soc + charged - driven + clamp + refill.
struct EnergyLedger {
  double initial_soc = 0.0;
  double charged_kwh = 0.0;  // battery side
  double grid_kwh = 0.0;     // drawn from the grid for this vehicle
  double driven_kwh = 0.0;   // demanded by distance covered
  double clamp_kwh = 0.0;    // + energy not available when depleted, - soc trimmed by capacity loss
  double refill_kwh = 0.0;   // recovery top-ups

  double expected_soc() const { return initial_soc + charged_kwh - driven_kwh + clamp_kwh + refill_kwh; }
};

struct ServeJob {
  JobId job = 0;
};
struct Charge {
  StationId station = 0;
  double c_rate = 0.0;  // battery side, capacity multiples per hour
};
struct Idle {};

struct ScheduleAction {
  VehicleId vehicle = 0;
  std::variant<ServeJob, Charge, Idle> action;
};
using Schedule = std::vector<ScheduleAction>;

struct VehicleView {
  VehicleId id = 0;
  VehicleState state = VehicleState::Idle;
  double soc = 0.0;
  double capacity = 0.0;
  double initial_capacity = 0.0;
  ZoneId zone = 0;
  double max_c_rate = 0.0;
  std::optional<JobId> job;
  std::optional<StationId> station;
  bool retired = false;

  double soh() const { return initial_capacity > 0.0 ? capacity / initial_capacity : 0.0; }
  double soc_fraction() const { return capacity > 0.0 ? soc / capacity : 0.0; }
};

// What a scheduler sees at the start of a tick.
struct Snapshot {
  Tick tick = 0;
  double tick_hours = 1.0;
  std::vector<VehicleView> vehicles;  // indexed by vehicle id
  std::vector<grid::Station> stations;
  std::vector<demand::Job> open_jobs;  // ARRIVED, ASSIGNED and IN_PROGRESS, by id
  const traffic::TrafficModel* traffic = nullptr;
};

struct Violation {
  VehicleId vehicle = -1;
  std::string message;
};

// Full list of problems with a schedule against a snapshot; empty when valid.
std::vector<Violation> validate(const Schedule& schedule, const Snapshot& snapshot);

enum class EventKind {
  JobReleased,
  JobAssigned,
  JobPreempted,
  JobPickedUp,
  JobCompleted,
  JobRejected,
  JobFailed,
  ChargerQueued,
  ChargerAttached,
  ChargerDetached,
  RecoveryStarted,
  RecoveryEnded,
  RetirementCrossed,
  VehicleRetired,
  ScheduleRejected,
};
const char* to_string(EventKind kind);

struct Event {
  Tick tick = 0;
  EventKind kind = EventKind::JobReleased;
  VehicleId vehicle = -1;
  JobId job = -1;
  StationId station = -1;
  double value = 0.0;  // fare for completions, SoH for retirement crossings
};

struct TickReport {
  Tick tick = 0;
  bool schedule_accepted = true;
  std::vector<Violation> violations;
  std::vector<Event> events;
  int completions = 0;
  double revenue = 0.0;
  std::vector<double> capacity_loss_kwh;  // per vehicle
  std::vector<double> c_rate;             // per vehicle, signed battery-side rate used for aging
  double grid_energy_kwh = 0.0;
  double grid_power_kw = 0.0;             // average over the tick
};

class Simulation {
 public:
  // initial_capacities, when given, replaces the fresh Q0 per vehicle (used to
  // carry battery health across environment episodes).
  Simulation(const SimConfig& config, std::shared_ptr<const traffic::TrafficModel> traffic,
             demand::JobStream jobs, const std::vector<double>* initial_capacities = nullptr);

  Snapshot snapshot() const;
  std::vector<Violation> validate(const Schedule& schedule) const;

  // Advances one tick. An invalid schedule is rejected as a whole; the tick
  // then proceeds as if the schedule were empty.
  TickReport tick(const Schedule& schedule);

  Tick now() const { return now_; }
  const SimConfig& config() const { return config_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const std::vector<EnergyLedger>& ledgers() const { return ledgers_; }
  const grid::Grid& grid() const { return grid_; }
  const demand::JobTable& jobs() const { return jobs_; }
  const demand::JobStream& job_stream() const { return stream_; }
  const traffic::TrafficModel& traffic() const { return *traffic_; }
  std::size_t vehicle_edge_count(VehicleState from, VehicleState to) const;
  std::size_t rejected_schedules() const { return rejected_schedules_; }

  // Empty when every module invariant holds.
  std::string audit() const;

 private:
  void set_state(Vehicle& v, VehicleState to);
  void release_vehicle(Vehicle& v, TickReport& report);
  void start_leg(Vehicle& v, ZoneId destination);
  void apply_schedule(const Schedule& schedule, TickReport& report);
  void fail_vehicle(Vehicle& v, TickReport& report);
  void attach_waiting(TickReport& report);
  void retire_pending(TickReport& report);
  double temperature_at(Tick t) const;

  SimConfig config_;
  std::shared_ptr<const traffic::TrafficModel> traffic_;
  demand::JobStream stream_;
  demand::JobTable jobs_;
  grid::Grid grid_;
  std::vector<Vehicle> vehicles_;
  std::vector<EnergyLedger> ledgers_;
  std::vector<double> last_capacity_;
  Rng rng_;
  Tick now_ = 0;
  std::size_t rejected_schedules_ = 0;
  std::array<std::size_t, kVehicleStateCount * kVehicleStateCount> edges_{};
};

}  // namespace evfleet::sim
