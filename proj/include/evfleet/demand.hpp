#pragma once

// Trip-record replay: parses delimited trip files, releases jobs in pickup
// order and tracks every job through its lifecycle.

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "evfleet/rng.hpp"
#include "evfleet/types.hpp"

namespace evfleet::demand {

enum class JobState { Arrived, Assigned, InProgress, Complete, Rejected, Failed };
inline constexpr std::size_t kJobStateCount = 6;

const char* to_string(JobState state);

// Allowed lifecycle edges:
//   Arrived    -> Assigned | Rejected
//   Assigned   -> InProgress | Arrived (preempted) | Failed
//   InProgress -> Complete | Failed
bool is_allowed_transition(JobState from, JobState to);
bool is_terminal(JobState state);

struct Job {
  JobId id = 0;
  Tick release_time = 0;
  ZoneId pickup_zone = 0;
  ZoneId dropoff_zone = 0;
  JobState state = JobState::Arrived;
  std::optional<VehicleId> assigned_vehicle;
  double fare = 0.0;
  double service_duration_h = 0.0;
  double service_distance_km = 0.0;
};

enum class TimeFormat {
  Iso,          // 2019-01-01 00:15:00 (a 'T' separator is accepted too)
  UsMeridiem,   // 01/01/2019 12:15:00 AM
  UnixSeconds,  // integer or decimal seconds since the epoch
};

// Column names for one dataset schema. Defaults follow the NYC yellow-taxi
// files (distances in miles).
struct ColumnMapping {
  std::string pickup_time = "tpep_pickup_datetime";
  std::string dropoff_time = "tpep_dropoff_datetime";
  std::string pickup_zone = "PULocationID";
  std::string dropoff_zone = "DOLocationID";
  std::string distance = "trip_distance";
  std::string fare = "fare_amount";
  char delimiter = ',';
  TimeFormat time_format = TimeFormat::Iso;
  double distance_scale = 1.609344;  // dataset unit -> km
};

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seconds since the epoch (UTC) for a timestamp in the given format.
std::optional<std::int64_t> parse_time(const std::string& text, TimeFormat format);
std::string format_iso_time(std::int64_t seconds);

// Splits one delimited line, honouring double-quoted fields.
std::vector<std::string> split_delimited(const std::string& line, char delimiter);

// Streaming reader over a delimited trip file.
class TripReader {
 public:
  TripReader(const std::string& path, ColumnMapping mapping,
             std::optional<std::set<ZoneId>> zone_filter = std::nullopt);

  // Next valid record; false at end of file. Malformed rows are skipped.
  bool next(TripRecord& out);

  std::size_t rows_read() const { return rows_; }
  std::size_t malformed() const { return malformed_; }
  std::size_t filtered() const { return filtered_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  ColumnMapping mapping_;
  std::optional<std::set<ZoneId>> zone_filter_;
  std::ifstream in_;
  std::array<std::size_t, 6> columns_{};
  std::size_t width_ = 0;
  std::size_t rows_ = 0;
  std::size_t malformed_ = 0;
  std::size_t filtered_ = 0;
};

struct StreamOptions {
  double tick_hours = 1.0;
  std::optional<std::int64_t> origin;  // defaults to the earliest pickup
  std::optional<std::set<ZoneId>> zone_filter;
};

// Jobs in non-decreasing release order with ids following that order (ties
// keep file order). Sorted files are streamed; unsorted ones are loaded and
// stably sorted.
class JobStream {
 public:
  static JobStream from_file(const std::string& path, const ColumnMapping& mapping,
                             const StreamOptions& options);
  static JobStream from_records(std::vector<TripRecord> records, const StreamOptions& options);

  // Every not yet released job with release_time <= now, in id order.
  std::vector<Job> release_due(Tick now);

  bool exhausted() const;
  std::int64_t origin() const { return origin_; }
  std::size_t malformed() const;
  std::size_t released() const { return static_cast<std::size_t>(next_id_); }
  bool streamed() const { return reader_ != nullptr; }

  Tick release_tick(std::int64_t pickup_time) const;

 private:
  JobStream() = default;
  bool peek();
  Job make_job(const TripRecord& record);

  double tick_hours_ = 1.0;
  std::int64_t origin_ = 0;
  JobId next_id_ = 0;
  std::size_t before_origin_ = 0;

  // Streaming source
  std::unique_ptr<TripReader> reader_;
  std::optional<TripRecord> lookahead_;
  bool reader_done_ = false;

  // In-memory source
  std::vector<TripRecord> records_;
  std::size_t cursor_ = 0;
  std::size_t preload_malformed_ = 0;
};

struct TransitionRecord {
  JobId job = 0;
  JobState from = JobState::Arrived;
  JobState to = JobState::Arrived;
  Tick tick = 0;
};

struct JobCounters {
  std::size_t released = 0;
  std::size_t completed = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  double revenue = 0.0;
};

// Owns the released jobs. Closed jobs are dropped from the table once they
// reach a terminal state; their outcome lives on in the counters and the
// transition-edge matrix.
class JobTable {
 public:
  explicit JobTable(bool keep_log = false) : keep_log_(keep_log) {}

  void add(Job job, Tick now);
  bool contains(JobId id) const { return open_.count(id) != 0; }
  const Job& at(JobId id) const;

  // Moves a job along a lifecycle edge. Throws InvariantViolation for any
  // other edge. Completion recognises the fare.
  void transition(JobId id, JobState to, Tick now, std::optional<VehicleId> vehicle = std::nullopt);

  const std::map<JobId, Job>& open() const { return open_; }
  std::size_t in_flight() const { return open_.size(); }
  const JobCounters& counters() const { return counters_; }
  const std::vector<TransitionRecord>& log() const { return log_; }
  std::size_t edge_count(JobState from, JobState to) const;

  // Conservation and edge-set audit. Returns a description of the first
  // problem found, or an empty string.
  std::string audit() const;

 private:
  bool keep_log_;
  std::map<JobId, Job> open_;
  JobCounters counters_;
  std::array<std::size_t, kJobStateCount * kJobStateCount> edges_{};
  std::vector<TransitionRecord> log_;
};

// Arrived jobs waiting at least timeout_hours become Rejected.
std::vector<JobId> expire_stale(JobTable& jobs, Tick now, double timeout_hours, double tick_hours);

// Synthetic demand for fixtures: Poisson arrivals, zones laid out on a line.
struct PoissonSpec {
  double rate_per_hour = 10.0;
  std::vector<ZoneId> zones;
  std::int64_t start_time = 1546300800;  // 2019-01-01 00:00:00 UTC
  double hours = 24.0;
  double zone_spacing_km = 3.0;
  double speed_kmh = 20.0;
  double base_fare = 3.0;
  double fare_per_km = 1.5;
  std::uint64_t seed = 1;
};

std::vector<TripRecord> generate_poisson_trips(const PoissonSpec& spec);

// Writes records with the mapping's column names. Distances are divided by
// distance_scale so that reading the file back reproduces them.
void write_trip_csv(const std::string& path, const std::vector<TripRecord>& records,
                    const ColumnMapping& mapping);

}  // namespace evfleet::demand
