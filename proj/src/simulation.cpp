#include "evfleet/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace evfleet::sim {

namespace {

std::size_t idx(VehicleState s) { return static_cast<std::size_t>(s); }

constexpr double kRateTolerance = 1e-9;

const demand::Job* find_job(const std::vector<demand::Job>& jobs, JobId id) {
  auto it = std::lower_bound(jobs.begin(), jobs.end(), id,
                             [](const demand::Job& j, JobId v) { return j.id < v; });
  return it != jobs.end() && it->id == id ? &*it : nullptr;
}

std::string vname(VehicleId v) { return "vehicle " + std::to_string(v); }

}  // namespace

const char* to_string(VehicleState state) {
  switch (state) {
    case VehicleState::Idle: return "IDLE";
    case VehicleState::ToPickup: return "TO_PICKUP";
    case VehicleState::InService: return "IN_SERVICE";
    case VehicleState::ToCharger: return "TO_CHARGER";
    case VehicleState::Charging: return "CHARGING";
    case VehicleState::Recovery: return "RECOVERY";
  }
  return "?";
}

bool is_allowed_transition(VehicleState from, VehicleState to) {
  using S = VehicleState;
  switch (from) {
    case S::Idle: return to == S::ToPickup || to == S::ToCharger;
    case S::ToPickup: return to == S::InService || to == S::Idle || to == S::Recovery;
    case S::InService: return to == S::Idle || to == S::Recovery;
    case S::ToCharger: return to == S::Charging || to == S::Idle || to == S::Recovery;
    case S::Charging: return to == S::Idle;
    case S::Recovery: return to == S::Idle;
  }
  return false;
}

bool is_preemptable(VehicleState state) {
  return state == VehicleState::Idle || state == VehicleState::ToPickup || state == VehicleState::ToCharger ||
         state == VehicleState::Charging;
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::JobReleased: return "job_released";
    case EventKind::JobAssigned: return "job_assigned";
    case EventKind::JobPreempted: return "job_preempted";
    case EventKind::JobPickedUp: return "job_picked_up";
    case EventKind::JobCompleted: return "job_completed";
    case EventKind::JobRejected: return "job_rejected";
    case EventKind::JobFailed: return "job_failed";
    case EventKind::ChargerQueued: return "charger_queued";
    case EventKind::ChargerAttached: return "charger_attached";
    case EventKind::ChargerDetached: return "charger_detached";
    case EventKind::RecoveryStarted: return "recovery_started";
    case EventKind::RecoveryEnded: return "recovery_ended";
    case EventKind::RetirementCrossed: return "retirement_crossed";
    case EventKind::VehicleRetired: return "vehicle_retired";
    case EventKind::ScheduleRejected: return "schedule_rejected";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate(const Schedule& schedule, const Snapshot& snap) {
  std::vector<Violation> out;
  std::set<VehicleId> seen;
  std::map<JobId, VehicleId> claimed;

  // Port power after the schedule, keyed by (station, port).
  std::vector<std::vector<double>> power(snap.stations.size());
  for (std::size_t s = 0; s < snap.stations.size(); ++s) {
    for (const auto& p : snap.stations[s].ports) power[s].push_back(p.power_kw);
  }
  auto attached_port = [&](VehicleId v) -> std::optional<std::pair<std::size_t, std::size_t>> {
    for (std::size_t s = 0; s < snap.stations.size(); ++s) {
      for (std::size_t p = 0; p < snap.stations[s].ports.size(); ++p) {
        if (snap.stations[s].ports[p].occupant == v) return std::make_pair(s, p);
      }
    }
    return std::nullopt;
  };

  for (const auto& a : schedule) {
    if (a.vehicle < 0 || static_cast<std::size_t>(a.vehicle) >= snap.vehicles.size()) {
      out.push_back({a.vehicle, "unknown " + vname(a.vehicle)});
      continue;
    }
    if (!seen.insert(a.vehicle).second) {
      out.push_back({a.vehicle, vname(a.vehicle) + " has more than one action"});
      continue;
    }
    const VehicleView& v = snap.vehicles[static_cast<std::size_t>(a.vehicle)];
    if (v.retired) {
      out.push_back({a.vehicle, vname(a.vehicle) + " is retired"});
      continue;
    }
    const auto* serve = std::get_if<ServeJob>(&a.action);
    const auto* charge = std::get_if<Charge>(&a.action);
    const bool same_job = serve && v.state == VehicleState::ToPickup && v.job == serve->job;
    const bool same_station = charge && v.station == charge->station &&
                              (v.state == VehicleState::ToCharger || v.state == VehicleState::Charging);
    if (!is_preemptable(v.state) && !same_job) {
      out.push_back({a.vehicle, vname(a.vehicle) + " cannot take instructions while " + to_string(v.state)});
      continue;
    }
    const auto port = attached_port(a.vehicle);
    if (port && !same_station) power[port->first][port->second] = 0.0;

    if (serve) {
      const demand::Job* job = find_job(snap.open_jobs, serve->job);
      if (!job) {
        out.push_back({a.vehicle, "job " + std::to_string(serve->job) + " does not exist or is closed"});
      } else if (job->state == demand::JobState::InProgress) {
        out.push_back({a.vehicle, "job " + std::to_string(serve->job) + " is already in progress"});
      }
      auto [it, fresh] = claimed.emplace(serve->job, a.vehicle);
      if (!fresh) {
        out.push_back({a.vehicle, "duplicate job " + std::to_string(serve->job) + " (also given to " +
                                      vname(it->second) + ")"});
      }
    } else if (charge) {
      if (charge->station < 0 || static_cast<std::size_t>(charge->station) >= snap.stations.size()) {
        out.push_back({a.vehicle, "charge target station " + std::to_string(charge->station) + " does not exist"});
        continue;
      }
      if (!std::isfinite(charge->c_rate) || charge->c_rate < 0.0 ||
          charge->c_rate > v.max_c_rate * (1.0 + kRateTolerance)) {
        out.push_back({a.vehicle, vname(a.vehicle) + " c-rate " + std::to_string(charge->c_rate) +
                                      " outside [0, " + std::to_string(v.max_c_rate) + "]"});
        continue;
      }
      const auto& st = snap.stations[static_cast<std::size_t>(charge->station)];
      const double grid_kw = charge->c_rate * v.capacity / st.efficiency;
      if (!grid::within_cap(grid_kw, st.max_port_power_kw())) {
        out.push_back({a.vehicle, vname(a.vehicle) + " requests " + std::to_string(grid_kw) +
                                      " kW, above the port cap of " + std::to_string(st.max_port_power_kw()) +
                                      " kW at station " + std::to_string(st.id)});
        continue;
      }
      if (port && same_station) power[port->first][port->second] = grid_kw;
    }
  }

  for (std::size_t s = 0; s < snap.stations.size(); ++s) {
    double sum = 0.0;
    for (double p : power[s]) sum += p;
    if (!grid::within_cap(sum, snap.stations[s].max_power_kw)) {
      out.push_back({-1, "station " + std::to_string(s) + " would draw " + std::to_string(sum) +
                             " kW, above the station cap of " + std::to_string(snap.stations[s].max_power_kw) +
                             " kW"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(const SimConfig& config, std::shared_ptr<const traffic::TrafficModel> traffic,
                       demand::JobStream jobs, const std::vector<double>* initial_capacities)
    : config_(config),
      traffic_(std::move(traffic)),
      stream_(std::move(jobs)),
      jobs_(false),
      rng_(config.seed) {
  validate_config(config_);
  if (!traffic_) throw ConfigError("simulation needs a traffic model");
  std::vector<grid::Station> stations;
  for (std::size_t i = 0; i < config_.stations.size(); ++i) {
    if (!traffic_->has_zone(config_.stations[i].zone)) {
      throw ConfigError("station zone " + std::to_string(config_.stations[i].zone) + " is not in the traffic model");
    }
    stations.push_back(grid::make_station(static_cast<StationId>(i), config_.stations[i]));
  }
  grid_ = grid::Grid(std::move(stations));

  const auto depots = config_.depot_zones();
  const double q0 = config_.fleet.initial_capacity_kwh;
  for (int i = 0; i < config_.fleet.size; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!traffic_->has_zone(depots[k])) {
      throw ConfigError("depot zone " + std::to_string(depots[k]) + " is not in the traffic model");
    }
    Vehicle v;
    v.id = i;
    v.battery.initial_capacity = q0;
    v.battery.capacity = initial_capacities ? std::clamp(initial_capacities->at(k), 0.0, q0) : q0;
    v.battery.soc = v.battery.capacity;
    v.battery.temperature_k = temperature_at(0);
    v.zone = v.depot_zone = depots[k];
    v.efficiency_kwh_per_km = config_.fleet.efficiency_kwh_per_km;
    v.max_c_rate = config_.max_c_rate();
    v.crossed_retirement = v.battery.soh() < config_.retirement_soh;
    v.retired = v.crossed_retirement && config_.mode == RetirementMode::Retire;
    vehicles_.push_back(v);
    ledgers_.push_back(EnergyLedger{v.battery.soc, 0, 0, 0, 0, 0});
    last_capacity_.push_back(v.battery.capacity);
  }
}

double Simulation::temperature_at(Tick t) const {
  const auto& profile = config_.battery.temperature_profile_k;
  return profile[static_cast<std::size_t>(t) % profile.size()];
}

std::size_t Simulation::vehicle_edge_count(VehicleState from, VehicleState to) const {
  return edges_[idx(from) * kVehicleStateCount + idx(to)];
}

void Simulation::set_state(Vehicle& v, VehicleState to) {
  if (!is_allowed_transition(v.state, to)) {
    throw InvariantViolation(vname(v.id) + ": illegal transition " + to_string(v.state) + " -> " + to_string(to));
  }
  ++edges_[idx(v.state) * kVehicleStateCount + idx(to)];
  v.state = to;
}

Snapshot Simulation::snapshot() const {
  Snapshot s;
  s.tick = now_;
  s.tick_hours = config_.tick_hours;
  s.traffic = traffic_.get();
  s.stations = grid_.stations();
  s.vehicles.reserve(vehicles_.size());
  for (const auto& v : vehicles_) {
    s.vehicles.push_back(VehicleView{v.id, v.state, v.battery.soc, v.battery.capacity, v.battery.initial_capacity,
                                     v.zone, v.max_c_rate, v.job, v.station, v.retired});
  }
  s.open_jobs.reserve(jobs_.open().size());
  for (const auto& [id, job] : jobs_.open()) s.open_jobs.push_back(job);
  return s;
}

std::vector<Violation> Simulation::validate(const Schedule& schedule) const {
  return sim::validate(schedule, snapshot());
}

void Simulation::start_leg(Vehicle& v, ZoneId destination) {
  const traffic::Leg leg = traffic_->sample(v.zone, destination, rng_);
  v.leg = TravelLeg{v.zone, destination, leg.duration_h, leg.distance_km, 0.0};
}

// Drops whatever the vehicle is doing and leaves it IDLE. A vehicle pulled
// off a leg is placed at whichever end of the leg it is closer to in time.
void Simulation::release_vehicle(Vehicle& v, TickReport& report) {
  if (v.state == VehicleState::Idle) return;
  if (v.leg) {
    if (2.0 * v.leg->elapsed_h >= v.leg->duration_h) v.zone = v.leg->destination;
    v.leg.reset();
  }
  if (v.state == VehicleState::ToPickup && v.job) {
    jobs_.transition(*v.job, demand::JobState::Arrived, now_);
    report.events.push_back({now_, EventKind::JobPreempted, v.id, *v.job, -1, 0.0});
  }
  if (v.state == VehicleState::Charging) {
    grid_.detach(v.id);
    report.events.push_back({now_, EventKind::ChargerDetached, v.id, -1, v.station.value_or(-1), 0.0});
  }
  if (v.state == VehicleState::ToCharger) grid_.dequeue(v.id);
  v.job.reset();
  v.station.reset();
  v.requested_c_rate = 0.0;
  set_state(v, VehicleState::Idle);
}

void Simulation::apply_schedule(const Schedule& schedule, TickReport& report) {
  Schedule ordered = schedule;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ScheduleAction& a, const ScheduleAction& b) { return a.vehicle < b.vehicle; });

  // Rate changes for vehicles already on a port are applied last, lowest
  // new-minus-old first, so intermediate station totals never exceed the
  // validated final total.
  struct RateChange {
    Vehicle* v;
    double grid_kw;
    double delta;
  };
  std::vector<RateChange> rate_changes;

  for (const auto& a : ordered) {
    Vehicle& v = vehicles_[static_cast<std::size_t>(a.vehicle)];
    if (const auto* serve = std::get_if<ServeJob>(&a.action)) {
      if (v.state == VehicleState::ToPickup && v.job == serve->job) continue;
      const demand::Job& job = jobs_.at(serve->job);
      if (job.state == demand::JobState::Assigned && job.assigned_vehicle && *job.assigned_vehicle != v.id) {
        release_vehicle(vehicles_[static_cast<std::size_t>(*job.assigned_vehicle)], report);
      }
      release_vehicle(v, report);
      const demand::Job& fresh = jobs_.at(serve->job);
      jobs_.transition(serve->job, demand::JobState::Assigned, now_, v.id);
      v.job = serve->job;
      set_state(v, VehicleState::ToPickup);
      start_leg(v, fresh.pickup_zone);
      report.events.push_back({now_, EventKind::JobAssigned, v.id, serve->job, -1, 0.0});
    } else if (const auto* charge = std::get_if<Charge>(&a.action)) {
      const auto& st = grid_.station(charge->station);
      const bool same_station = v.station == charge->station &&
                                (v.state == VehicleState::ToCharger || v.state == VehicleState::Charging);
      if (same_station) {
        v.requested_c_rate = charge->c_rate;
        if (v.state == VehicleState::Charging) {
          const double grid_kw = charge->c_rate * v.battery.capacity / st.efficiency;
          const double old = st.ports[static_cast<std::size_t>(*st.port_of(v.id))].power_kw;
          rate_changes.push_back({&v, grid_kw, grid_kw - old});
        }
        continue;
      }
      release_vehicle(v, report);
      v.station = charge->station;
      v.requested_c_rate = charge->c_rate;
      set_state(v, VehicleState::ToCharger);
      start_leg(v, grid_.station(charge->station).zone);
    } else {
      release_vehicle(v, report);
    }
  }

  std::stable_sort(rate_changes.begin(), rate_changes.end(),
                   [](const RateChange& a, const RateChange& b) { return a.delta < b.delta; });
  for (const auto& rc : rate_changes) {
    const auto at = grid_.find(rc.v->id);
    grid_.command_power(at->station, at->port, rc.grid_kw);
  }
}

void Simulation::fail_vehicle(Vehicle& v, TickReport& report) {
  if (v.job) {
    jobs_.transition(*v.job, demand::JobState::Failed, now_);
    report.events.push_back({now_, EventKind::JobFailed, v.id, *v.job, -1, 0.0});
  }
  if (v.state == VehicleState::ToCharger) grid_.dequeue(v.id);
  v.leg.reset();
  v.job.reset();
  v.station.reset();
  v.requested_c_rate = 0.0;
  set_state(v, VehicleState::Recovery);
  v.recovery_until = now_ + config_.recovery_ticks();
  report.events.push_back({now_, EventKind::RecoveryStarted, v.id, -1, -1, 0.0});
}

void Simulation::attach_waiting(TickReport& report) {
  for (const auto& station : grid_.stations()) {
    const StationId sid = station.id;
    while (true) {
      const grid::Station& st = grid_.station(sid);
      if (st.queue.empty()) break;
      const auto port = st.first_free_port();
      if (!port) break;
      const VehicleId vid = st.queue.front();
      grid_.dequeue(vid);
      Vehicle& v = vehicles_[static_cast<std::size_t>(vid)];
      grid_.attach(sid, *port, vid);
      set_state(v, VehicleState::Charging);
      v.charging_from = now_ + 1;
      // A rate requested before arrival is granted up to the headroom left
      // on the port and the station.
      const grid::Station& after = grid_.station(sid);
      const double wanted = v.requested_c_rate * v.battery.capacity / after.efficiency;
      const double headroom = std::max(0.0, after.max_power_kw - after.power_kw());
      const double granted = std::max(0.0, std::min({wanted, after.ports[static_cast<std::size_t>(*port)].max_power_kw, headroom}));
      grid_.command_power(sid, *port, granted);
      report.events.push_back({now_, EventKind::ChargerAttached, vid, -1, sid, granted});
    }
  }
}

void Simulation::retire_pending(TickReport& report) {
  for (auto& v : vehicles_) {
    if (!v.retire_pending || v.retired) continue;
    if (v.state == VehicleState::InService) continue;  // passenger aboard; retire after drop-off
    if (v.state == VehicleState::Recovery) {
      v.recovery_until.reset();
      set_state(v, VehicleState::Idle);
    } else {
      release_vehicle(v, report);
    }
    v.retired = true;
    v.retire_pending = false;
    report.events.push_back({now_, EventKind::VehicleRetired, v.id, -1, -1, v.battery.soh()});
  }
}

TickReport Simulation::tick(const Schedule& schedule) {
  TickReport report;
  report.tick = now_;
  const std::size_t n = vehicles_.size();
  const double dt = config_.tick_hours;
  report.capacity_loss_kwh.assign(n, 0.0);
  report.c_rate.assign(n, 0.0);

  // 1. schedule
  report.violations = validate(schedule);
  if (report.violations.empty()) {
    apply_schedule(schedule, report);
  } else {
    report.schedule_accepted = false;
    ++rejected_schedules_;
    report.events.push_back({now_, EventKind::ScheduleRejected, -1, -1, -1,
                             static_cast<double>(report.violations.size())});
  }

  // 2. movement
  std::vector<char> depleted(n, 0), arrived(n, 0);
  for (auto& v : vehicles_) {
    if (v.retired || !v.leg || v.leg->arrived()) continue;
    if (v.state != VehicleState::ToPickup && v.state != VehicleState::InService && v.state != VehicleState::ToCharger) {
      continue;
    }
    auto& leg = *v.leg;
    const double step = std::min(dt, leg.remaining_h());
    const double distance = leg.duration_h > 0.0 ? leg.distance_km * step / leg.duration_h : leg.distance_km;
    const double energy = distance * v.efficiency_kwh_per_km;
    auto& ledger = ledgers_[static_cast<std::size_t>(v.id)];
    const double shortfall = std::max(0.0, energy - v.battery.soc);
    v.battery.soc = std::max(0.0, v.battery.soc - energy);
    ledger.driven_kwh += energy;
    ledger.clamp_kwh += shortfall;
    if (v.battery.capacity > 0.0) {
      report.c_rate[static_cast<std::size_t>(v.id)] = -(energy - shortfall) / (v.battery.capacity * dt);
    }
    leg.elapsed_h = step >= leg.remaining_h() ? leg.duration_h : leg.elapsed_h + step;
    arrived[static_cast<std::size_t>(v.id)] = leg.arrived();
    depleted[static_cast<std::size_t>(v.id)] = shortfall > 0.0 || (v.battery.soc <= 0.0 && !leg.arrived());
  }

  // 3. charging
  for (auto& v : vehicles_) {
    if (v.state != VehicleState::Charging || v.charging_from > now_) continue;
    const auto at = grid_.find(v.id);
    const auto& st = grid_.station(at->station);
    const double port_kw = st.ports[static_cast<std::size_t>(at->port)].power_kw;
    const double offered = st.efficiency * port_kw * dt;
    const double accepted = std::clamp(v.battery.capacity - v.battery.soc, 0.0, offered);
    const double drawn = accepted / st.efficiency;
    v.battery.soc += accepted;
    auto& ledger = ledgers_[static_cast<std::size_t>(v.id)];
    ledger.charged_kwh += accepted;
    ledger.grid_kwh += drawn;
    report.grid_energy_kwh += drawn;
    if (v.battery.capacity > 0.0) report.c_rate[static_cast<std::size_t>(v.id)] = accepted / (v.battery.capacity * dt);
  }
  report.grid_power_kw = report.grid_energy_kwh / dt;

  // 4. capacity loss
  const double temperature = temperature_at(now_);
  for (auto& v : vehicles_) {
    const auto k = static_cast<std::size_t>(v.id);
    v.battery.temperature_k = temperature;
    const double c = report.c_rate[k];
    if (!config_.battery.aging_enabled || c == 0.0 || v.battery.capacity <= 0.0) continue;
    double loss = battery::capacity_loss_step(v.battery, {c, dt}, config_.battery.constants);
    loss = std::min(loss, v.battery.capacity);
    const double soc_before = v.battery.soc;
    v.battery = battery::apply_capacity_loss(v.battery, loss);
    ledgers_[k].clamp_kwh -= soc_before - v.battery.soc;
    report.capacity_loss_kwh[k] = loss;
    if (!v.crossed_retirement && v.battery.soh() < config_.retirement_soh) {
      v.crossed_retirement = true;
      report.events.push_back({now_, EventKind::RetirementCrossed, v.id, -1, -1, v.battery.soh()});
      if (config_.mode == RetirementMode::Retire) v.retire_pending = true;
    }
  }

  // 5. job lifecycle
  for (auto& v : vehicles_) {
    if (depleted[static_cast<std::size_t>(v.id)]) fail_vehicle(v, report);
  }
  for (auto& v : vehicles_) {
    const auto k = static_cast<std::size_t>(v.id);
    if (!arrived[k] || depleted[k]) continue;
    switch (v.state) {
      case VehicleState::ToPickup: {
        const demand::Job job = jobs_.at(*v.job);
        jobs_.transition(job.id, demand::JobState::InProgress, now_);
        v.zone = job.pickup_zone;
        set_state(v, VehicleState::InService);
        const double duration = std::max(job.service_duration_h, traffic_->sample_options().min_duration_h);
        v.leg = TravelLeg{job.pickup_zone, job.dropoff_zone, duration, job.service_distance_km, 0.0};
        report.events.push_back({now_, EventKind::JobPickedUp, v.id, job.id, -1, 0.0});
        break;
      }
      case VehicleState::InService: {
        const double fare = jobs_.at(*v.job).fare;
        const JobId id = *v.job;
        jobs_.transition(id, demand::JobState::Complete, now_);
        v.zone = v.leg->destination;
        v.leg.reset();
        v.job.reset();
        set_state(v, VehicleState::Idle);
        ++report.completions;
        report.revenue += fare;
        report.events.push_back({now_, EventKind::JobCompleted, v.id, id, -1, fare});
        break;
      }
      case VehicleState::ToCharger: {
        v.zone = v.leg->destination;
        v.leg.reset();
        grid_.enqueue(*v.station, v.id);
        report.events.push_back({now_, EventKind::ChargerQueued, v.id, -1, *v.station, 0.0});
        break;
      }
      default: break;
    }
  }
  attach_waiting(report);
  for (JobId id : demand::expire_stale(jobs_, now_, config_.job_timeout_hours, dt)) {
    report.events.push_back({now_, EventKind::JobRejected, -1, id, -1, 0.0});
  }

  // 6. recovery and retirement
  for (auto& v : vehicles_) {
    if (v.state != VehicleState::Recovery || !v.recovery_until || now_ < *v.recovery_until) continue;
    v.recovery_until.reset();
    v.zone = v.depot_zone;
    ledgers_[static_cast<std::size_t>(v.id)].refill_kwh += v.battery.capacity - v.battery.soc;
    v.battery.soc = v.battery.capacity;
    set_state(v, VehicleState::Idle);
    report.events.push_back({now_, EventKind::RecoveryEnded, v.id, -1, -1, 0.0});
  }
  retire_pending(report);

  // 7. release
  for (auto& job : stream_.release_due(now_)) {
    const JobId id = job.id;
    const bool routable = traffic_->has_zone(job.pickup_zone) && traffic_->has_zone(job.dropoff_zone);
    jobs_.add(std::move(job), now_);
    report.events.push_back({now_, EventKind::JobReleased, -1, id, -1, 0.0});
    if (!routable) {
      // Zones the traffic model has never seen cannot be served.
      jobs_.transition(id, demand::JobState::Rejected, now_);
      report.events.push_back({now_, EventKind::JobRejected, -1, id, -1, 0.0});
    }
  }

  // 8. audit
  if (config_.audit) {
    if (auto problem = audit(); !problem.empty()) {
      throw InvariantViolation("tick " + std::to_string(now_) + ": " + problem);
    }
  }
  for (std::size_t k = 0; k < n; ++k) last_capacity_[k] = vehicles_[k].battery.capacity;
  ++now_;
  return report;
}

std::string Simulation::audit() const {
  if (auto g = grid_.audit(); !g.empty()) return g;
  if (auto j = jobs_.audit(); !j.empty()) return j;
  for (std::size_t f = 0; f < kVehicleStateCount; ++f) {
    for (std::size_t t = 0; t < kVehicleStateCount; ++t) {
      if (edges_[f * kVehicleStateCount + t] &&
          !is_allowed_transition(static_cast<VehicleState>(f), static_cast<VehicleState>(t))) {
        return "illegal vehicle edge recorded";
      }
    }
  }
  for (const auto& v : vehicles_) {
    const auto k = static_cast<std::size_t>(v.id);
    const auto& b = v.battery;
    const std::string who = vname(v.id);
    if (b.soc < 0.0 || b.soc > b.capacity) return who + " soc outside [0, capacity]";
    if (b.capacity < 0.0 || b.capacity > b.initial_capacity) return who + " capacity outside [0, Q0]";
    if (b.capacity > last_capacity_[k]) return who + " capacity increased";
    const auto& l = ledgers_[k];
    const double scale = std::max({1.0, l.initial_soc, l.charged_kwh, l.driven_kwh, std::abs(l.clamp_kwh), l.refill_kwh});
    if (std::abs(b.soc - l.expected_soc()) > 1e-9 * scale) return who + " energy ledger does not close";

    const auto at = grid_.find(v.id);
    const bool queued = grid_.queued_at(v.id).has_value();
    switch (v.state) {
      case VehicleState::Idle:
        if (v.job || at || queued || v.leg) return who + " is IDLE but holds an assignment";
        break;
      case VehicleState::ToPickup: {
        if (!v.job || !jobs_.contains(*v.job)) return who + " is TO_PICKUP without an open job";
        const auto& job = jobs_.at(*v.job);
        if (job.state != demand::JobState::Assigned || job.assigned_vehicle != v.id) return who + " job link broken";
        if (!v.leg || v.leg->arrived()) return who + " is TO_PICKUP without pending travel";
        break;
      }
      case VehicleState::InService: {
        if (!v.job || !jobs_.contains(*v.job)) return who + " is IN_SERVICE without an open job";
        const auto& job = jobs_.at(*v.job);
        if (job.state != demand::JobState::InProgress || job.assigned_vehicle != v.id) return who + " job link broken";
        if (!v.leg) return who + " is IN_SERVICE without a trip";
        break;
      }
      case VehicleState::ToCharger:
        if (!v.station) return who + " is TO_CHARGER without a station";
        if (!queued && (!v.leg || v.leg->arrived())) return who + " is TO_CHARGER but neither moving nor queued";
        if (at) return who + " is TO_CHARGER but already attached";
        break;
      case VehicleState::Charging:
        if (!at || at->station != v.station) return who + " is CHARGING without its port";
        break;
      case VehicleState::Recovery:
        if (!v.recovery_until || v.job || at || queued) return who + " RECOVERY bookkeeping broken";
        break;
    }
    if (v.state != VehicleState::Charging && at) return who + " holds a port while " + to_string(v.state);
  }
  return {};
}

}  // namespace evfleet::sim
