#include "evfleet/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace evfleet::grid {

namespace {

std::string port_name(const Station& s, PortId p) {
  return "station " + std::to_string(s.id) + " port " + std::to_string(p);
}

Port& port_ref(Station& s, PortId p) {
  if (p < 0 || static_cast<std::size_t>(p) >= s.ports.size()) {
    throw GridError(port_name(s, p) + " does not exist");
  }
  return s.ports[static_cast<std::size_t>(p)];
}

}  // namespace

double Station::power_kw() const {
  double sum = 0.0;
  for (const auto& p : ports) sum += p.power_kw;
  return sum;
}

double Station::max_port_power_kw() const {
  double m = 0.0;
  for (const auto& p : ports) m = std::max(m, p.max_power_kw);
  return m;
}

std::optional<PortId> Station::first_free_port() const {
  for (const auto& p : ports) {
    if (!p.occupant) return p.id;
  }
  return std::nullopt;
}

std::optional<PortId> Station::port_of(VehicleId vehicle) const {
  for (const auto& p : ports) {
    if (p.occupant == vehicle) return p.id;
  }
  return std::nullopt;
}

Station make_station(StationId id, const StationSpec& spec) {
  if (spec.ports <= 0) throw GridError("station needs at least one port");
  if (!(spec.efficiency > 0.0 && spec.efficiency <= 1.0)) throw GridError("station efficiency must be in (0, 1]");
  if (!(spec.station_max_kw > 0.0) || !(spec.port_max_kw > 0.0)) throw GridError("power caps must be positive");
  Station s;
  s.id = id;
  s.zone = spec.zone;
  s.max_power_kw = spec.station_max_kw;
  s.efficiency = spec.efficiency;
  for (int i = 0; i < spec.ports; ++i) s.ports.push_back(Port{i, std::nullopt, 0.0, spec.port_max_kw});
  return s;
}

bool within_cap(double value, double cap) { return value <= cap * (1.0 + kCapTolerance); }

Station attach(Station station, PortId port, VehicleId vehicle) {
  if (station.port_of(vehicle)) {
    throw GridError("vehicle " + std::to_string(vehicle) + " already attached at station " +
                    std::to_string(station.id));
  }
  Port& p = port_ref(station, port);
  if (p.occupant) {
    throw GridError(port_name(station, port) + " is occupied by vehicle " + std::to_string(*p.occupant));
  }
  p.occupant = vehicle;
  p.power_kw = 0.0;
  return station;
}

Station detach(Station station, PortId port) {
  Port& p = port_ref(station, port);
  p.occupant.reset();
  p.power_kw = 0.0;
  return station;
}

Station command_power(Station station, PortId port, double grid_power_kw) {
  Port& p = port_ref(station, port);
  if (!p.occupant) throw GridError(port_name(station, port) + " has no vehicle attached");
  if (!(grid_power_kw >= 0.0)) throw GridError("negative power commanded on " + port_name(station, port));
  if (!within_cap(grid_power_kw, p.max_power_kw)) {
    throw CapViolation(Limit::Port, port_name(station, port) + ": " + std::to_string(grid_power_kw) +
                                        " kW exceeds port cap " + std::to_string(p.max_power_kw) + " kW");
  }
  const double others = station.power_kw() - p.power_kw;
  if (!within_cap(others + grid_power_kw, station.max_power_kw)) {
    throw CapViolation(Limit::Station, "station " + std::to_string(station.id) + ": total " +
                                           std::to_string(others + grid_power_kw) + " kW exceeds station cap " +
                                           std::to_string(station.max_power_kw) + " kW");
  }
  p.power_kw = std::min(grid_power_kw, p.max_power_kw);
  return station;
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(std::vector<Station> stations) : stations_(std::move(stations)) {
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    if (stations_[i].id != static_cast<StationId>(i)) throw GridError("station ids must be 0..n-1 in order");
  }
}

const Station& Grid::station(StationId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= stations_.size()) {
    throw GridError("station " + std::to_string(id) + " does not exist");
  }
  return stations_[static_cast<std::size_t>(id)];
}

Station& Grid::mutable_station(StationId id) {
  return const_cast<Station&>(static_cast<const Grid&>(*this).station(id));
}

std::optional<Grid::Location> Grid::find(VehicleId vehicle) const {
  for (const auto& s : stations_) {
    if (auto p = s.port_of(vehicle)) return Location{s.id, *p};
  }
  return std::nullopt;
}

void Grid::attach(StationId station, PortId port, VehicleId vehicle) {
  if (auto at = find(vehicle)) {
    throw GridError("vehicle " + std::to_string(vehicle) + " already attached at station " +
                    std::to_string(at->station) + " port " + std::to_string(at->port));
  }
  Station& s = mutable_station(station);
  s = grid::attach(std::move(s), port, vehicle);
}

void Grid::detach(VehicleId vehicle) {
  if (auto at = find(vehicle)) {
    Station& s = mutable_station(at->station);
    s = grid::detach(std::move(s), at->port);
  }
}

void Grid::command_power(StationId station, PortId port, double grid_power_kw) {
  Station& s = mutable_station(station);
  s = grid::command_power(std::move(s), port, grid_power_kw);
}

void Grid::enqueue(StationId station, VehicleId vehicle) {
  dequeue(vehicle);
  mutable_station(station).queue.push_back(vehicle);
}

void Grid::dequeue(VehicleId vehicle) {
  for (auto& s : stations_) {
    std::erase(s.queue, vehicle);
  }
}

std::optional<StationId> Grid::queued_at(VehicleId vehicle) const {
  for (const auto& s : stations_) {
    if (std::find(s.queue.begin(), s.queue.end(), vehicle) != s.queue.end()) return s.id;
  }
  return std::nullopt;
}

std::string Grid::audit() const {
  std::set<VehicleId> seen;
  for (const auto& s : stations_) {
    for (const auto& p : s.ports) {
      if (p.power_kw < 0.0 || !within_cap(p.power_kw, p.max_power_kw)) {
        return port_name(s, p.id) + " power " + std::to_string(p.power_kw) + " kW outside [0, cap]";
      }
      if (p.power_kw > 0.0 && !p.occupant) return port_name(s, p.id) + " draws power while empty";
      if (p.occupant && !seen.insert(*p.occupant).second) {
        return "vehicle " + std::to_string(*p.occupant) + " occupies more than one port";
      }
    }
    if (!within_cap(s.power_kw(), s.max_power_kw)) {
      return "station " + std::to_string(s.id) + " draws " + std::to_string(s.power_kw()) +
             " kW above its cap " + std::to_string(s.max_power_kw) + " kW";
    }
  }
  return {};
}

double total_power(const std::vector<Station>& stations) {
  double sum = 0.0;
  for (const auto& s : stations) sum += s.power_kw();
  return sum;
}

}  // namespace evfleet::grid
