#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evfleet {

using ZoneId = std::int32_t;
using VehicleId = std::int32_t;
using JobId = std::int64_t;
using StationId = std::int32_t;
using PortId = std::int32_t;
using Tick = std::int64_t;

// One row of a trip dataset. Times are seconds since the Unix epoch.
struct TripRecord {
  std::int64_t pickup_time = 0;
  std::int64_t dropoff_time = 0;
  ZoneId pickup_zone = 0;
  ZoneId dropoff_zone = 0;
  double distance_km = 0.0;
  double fare = 0.0;

  double duration_hours() const {
    return static_cast<double>(dropoff_time - pickup_time) / 3600.0;
  }
};

// Raised for malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a simulation self-audit finds a broken invariant.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace evfleet
