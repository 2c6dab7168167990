#include <algorithm>
#include <map>
#include <queue>
#include <tuple>

#include "evfleet/policy.hpp"

namespace evfleet::policy {

using sim::VehicleState;

StationId nearest_station(const Snapshot& snapshot, ZoneId zone) {
  if (snapshot.stations.empty()) throw ConfigError("no charging stations");
  if (!snapshot.traffic) throw ConfigError("snapshot has no traffic model");
  StationId best = snapshot.stations.front().id;
  double best_h = snapshot.traffic->expected(zone, snapshot.stations.front().zone).duration_h;
  for (std::size_t s = 1; s < snapshot.stations.size(); ++s) {
    const double h = snapshot.traffic->expected(zone, snapshot.stations[s].zone).duration_h;
    if (h < best_h) {
      best_h = h;
      best = snapshot.stations[s].id;
    }
  }
  return best;
}

double max_feasible_rate(const sim::VehicleView& vehicle, const grid::Station& station) {
  if (vehicle.capacity <= 0.0) return vehicle.max_c_rate;
  return std::min(vehicle.max_c_rate, station.max_port_power_kw() * station.efficiency / vehicle.capacity);
}

void match_nearest(const Snapshot& snapshot, const std::vector<VehicleId>& pool, Schedule& out,
                   bool idle_unmatched) {
  // Arrived jobs grouped by pickup zone, lowest id first.
  std::map<ZoneId, std::vector<JobId>> by_zone;
  for (const auto& job : snapshot.open_jobs) {
    if (job.state == demand::JobState::Arrived) by_zone[job.pickup_zone].push_back(job.id);
  }

  struct Candidate {
    double hours;
    VehicleId vehicle;
    JobId job;
    ZoneId zone;
    bool operator>(const Candidate& o) const {
      return std::tie(hours, vehicle, job) > std::tie(o.hours, o.vehicle, o.job);
    }
  };
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
  std::map<ZoneId, std::size_t> cursor;  // first possibly-unmatched job per zone
  for (VehicleId v : pool) {
    const ZoneId from = snapshot.vehicles[static_cast<std::size_t>(v)].zone;
    for (const auto& [zone, jobs] : by_zone) {
      heap.push({snapshot.traffic->expected(from, zone).duration_h, v, jobs.front(), zone});
    }
  }

  std::map<VehicleId, bool> vehicle_done;
  std::map<JobId, bool> job_done;
  while (!heap.empty()) {
    Candidate c = heap.top();
    heap.pop();
    if (vehicle_done[c.vehicle]) continue;
    if (job_done[c.job]) {
      // Within a zone every job is equally near, so the lowest unmatched id
      // is the only candidate worth re-queuing.
      const auto& jobs = by_zone[c.zone];
      std::size_t& k = cursor[c.zone];
      while (k < jobs.size() && job_done[jobs[k]]) ++k;
      if (k < jobs.size()) heap.push({c.hours, c.vehicle, jobs[k], c.zone});
      continue;
    }
    vehicle_done[c.vehicle] = true;
    job_done[c.job] = true;
    out.push_back({c.vehicle, sim::ServeJob{c.job}});
  }
  if (idle_unmatched) {
    for (VehicleId v : pool) {
      if (!vehicle_done[v]) out.push_back({v, sim::Idle{}});
    }
  }
}

BaselinePolicy::BaselinePolicy(double low, double high) : low_(low), high_(high) {
  if (!(low >= 0.0 && low <= high && high <= 1.0)) throw ConfigError("baseline thresholds need 0 <= low <= high <= 1");
}

Schedule BaselinePolicy::decide(const Snapshot& snapshot) {
  Schedule out;
  std::vector<VehicleId> idle_pool;      // no action needed when unmatched
  std::vector<VehicleId> released_pool;  // must be told to stop charging
  std::vector<std::vector<VehicleId>> staying(snapshot.stations.size());

  for (const auto& v : snapshot.vehicles) {
    if (v.retired) continue;
    if (v.state == VehicleState::Idle) {
      if (v.soc <= low_ * v.capacity) {
        const StationId s = nearest_station(snapshot, v.zone);
        out.push_back({v.id, sim::Charge{s, max_feasible_rate(v, snapshot.stations[static_cast<std::size_t>(s)])}});
      } else {
        idle_pool.push_back(v.id);
      }
    } else if (v.state == VehicleState::Charging) {
      if (v.soc >= high_ * v.capacity) {
        released_pool.push_back(v.id);
      } else {
        staying[static_cast<std::size_t>(*v.station)].push_back(v.id);
      }
    }
  }

  // Sessions that keep charging are raised towards full rate as headroom
  // frees up, lowest vehicle id first.
  for (std::size_t s = 0; s < staying.size(); ++s) {
    const auto& st = snapshot.stations[s];
    auto current = [&](VehicleId v) { return st.ports[static_cast<std::size_t>(*st.port_of(v))].power_kw; };
    double used = 0.0;
    for (VehicleId v : staying[s]) used += current(v);
    double headroom = std::max(0.0, st.max_power_kw - used);
    for (VehicleId id : staying[s]) {
      const auto& v = snapshot.vehicles[static_cast<std::size_t>(id)];
      if (v.capacity <= 0.0) continue;
      const double now_kw = current(id);
      const double want_kw = max_feasible_rate(v, st) * v.capacity / st.efficiency;
      if (want_kw <= now_kw) continue;
      const double new_kw = std::min(want_kw, now_kw + headroom);
      if (new_kw <= now_kw) continue;
      headroom -= new_kw - now_kw;
      out.push_back({id, sim::Charge{st.id, new_kw * st.efficiency / v.capacity}});
    }
  }

  std::vector<VehicleId> pool = idle_pool;
  pool.insert(pool.end(), released_pool.begin(), released_pool.end());
  std::sort(pool.begin(), pool.end());
  Schedule matches;
  match_nearest(snapshot, pool, matches, false);
  std::vector<bool> matched(snapshot.vehicles.size(), false);
  for (const auto& a : matches) matched[static_cast<std::size_t>(a.vehicle)] = true;
  out.insert(out.end(), matches.begin(), matches.end());
  for (VehicleId v : released_pool) {
    if (!matched[static_cast<std::size_t>(v)]) out.push_back({v, sim::Idle{}});
  }
  return out;
}

}  // namespace evfleet::policy
