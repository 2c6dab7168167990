#pragma once

// Charging infrastructure: stations with ports, power caps and efficiency.
// Port power is grid-side; the battery receives efficiency * power.

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evfleet/types.hpp"

namespace evfleet::grid {

// Relative slack when comparing commanded power against a cap, so that a
// rate derived from the cap itself (cap * eta / capacity) round-trips.
inline constexpr double kCapTolerance = 1e-9;

struct Port {
  PortId id = 0;
  std::optional<VehicleId> occupant;
  double power_kw = 0.0;
  double max_power_kw = 50.0;
};

struct Station {
  StationId id = 0;
  ZoneId zone = 0;
  double max_power_kw = 500.0;
  double efficiency = 0.9;
  std::vector<Port> ports;
  std::deque<VehicleId> queue;  // vehicles waiting for a free port, FIFO

  double power_kw() const;
  double max_port_power_kw() const;
  std::optional<PortId> first_free_port() const;
  std::optional<PortId> port_of(VehicleId vehicle) const;
};

struct StationSpec {
  ZoneId zone = 0;
  int ports = 10;
  double port_max_kw = 50.0;
  double station_max_kw = 500.0;
  double efficiency = 0.9;
};

Station make_station(StationId id, const StationSpec& spec);

enum class Limit { Port, Station };

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapViolation : public GridError {
 public:
  CapViolation(Limit limit, const std::string& what) : GridError(what), limit_(limit) {}
  Limit limit() const { return limit_; }

 private:
  Limit limit_;
};

bool within_cap(double value, double cap);

// Single-station operations.
Station attach(Station station, PortId port, VehicleId vehicle);
Station detach(Station station, PortId port);
// Throws CapViolation naming the port or station limit; GridError when the
// port is empty.
Station command_power(Station station, PortId port, double grid_power_kw);

// Fleet-wide charging infrastructure. Enforces that a vehicle sits on at
// most one port across all stations.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Station> stations);

  const std::vector<Station>& stations() const { return stations_; }
  const Station& station(StationId id) const;

  void attach(StationId station, PortId port, VehicleId vehicle);
  void detach(VehicleId vehicle);
  void command_power(StationId station, PortId port, double grid_power_kw);

  struct Location {
    StationId station;
    PortId port;
  };
  std::optional<Location> find(VehicleId vehicle) const;

  void enqueue(StationId station, VehicleId vehicle);
  void dequeue(VehicleId vehicle);  // no-op when not queued
  std::optional<StationId> queued_at(VehicleId vehicle) const;
  Station& mutable_station(StationId id);

  // Empty string when every port and station cap holds and occupancy is exclusive.
  std::string audit() const;

 private:
  std::vector<Station> stations_;
};

double total_power(const std::vector<Station>& stations);

}  // namespace evfleet::grid
