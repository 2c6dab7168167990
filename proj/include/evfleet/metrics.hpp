#pragma once

// Evaluation series recorded once per tick: fleet SoH quartiles, cumulative
// revenue, grid power and its distribution, retirements and job totals.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "evfleet/simulation.hpp"
#include "evfleet/types.hpp"

namespace evfleet::metrics {

// Linear interpolation between order statistics of sorted values,
// p in [0, 1]. Empty input is an error.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  bool empty = true;
};
Quartiles quartiles(std::vector<double> values);

struct SohRow {
  Tick tick = 0;
  std::size_t active = 0;  // vehicles counted
  Quartiles soh;
};

struct RetirementEntry {
  VehicleId vehicle = 0;
  Tick tick = 0;
  double soh = 0.0;
  bool removed = false;  // false: threshold crossed, vehicle kept in service
};

struct JobTotals {
  std::size_t released = 0;
  std::size_t completed = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
};

class MetricsBundle {
 public:
  explicit MetricsBundle(double histogram_bin_kw = 10.0);

  // `after` is the snapshot taken once the tick has been applied. Ticks must
  // arrive consecutively from 0; anything else throws std::logic_error.
  void record(const sim::Snapshot& after, const sim::TickReport& report);

  const std::vector<SohRow>& soh_series() const { return soh_; }
  const std::vector<double>& revenue_series() const { return revenue_; }
  const std::vector<double>& power_series() const { return power_; }
  // Bin index -> tick count; bin k covers [k * width, (k + 1) * width).
  const std::map<std::int64_t, std::size_t>& power_histogram() const { return histogram_; }
  const std::vector<RetirementEntry>& retirement_log() const { return retirements_; }
  const JobTotals& jobs() const { return jobs_; }
  double histogram_bin_kw() const { return bin_kw_; }
  std::size_t ticks() const { return power_.size(); }
  double total_revenue() const { return revenue_.empty() ? 0.0 : revenue_.back(); }
  double grid_energy_kwh() const { return grid_energy_kwh_; }
  double capacity_loss_kwh() const { return capacity_loss_kwh_; }
  std::size_t rejected_schedules() const { return rejected_schedules_; }

 private:
  double bin_kw_;
  std::vector<SohRow> soh_;
  std::vector<double> revenue_;
  std::vector<double> power_;
  std::map<std::int64_t, std::size_t> histogram_;
  std::vector<RetirementEntry> retirements_;
  JobTotals jobs_;
  double cumulative_revenue_ = 0.0;
  double grid_energy_kwh_ = 0.0;
  double capacity_loss_kwh_ = 0.0;
  std::size_t rejected_schedules_ = 0;
};

// Written into summary.json next to the totals.
struct RunInfo {
  std::string config_hash;
  std::string dataset_hash;
  std::string traffic_hash;
  std::uint64_t seed = 0;
  bool seed_overridden = false;  // seed came from the command line, not the config
  std::string policy;
  std::string mode;
  std::size_t fleet_size = 0;
};

nlohmann::ordered_json summary(const MetricsBundle& bundle, const RunInfo& info);

// Writes soh.csv, revenue.csv, power.csv, power_histogram.csv,
// retirements.csv and summary.json into `dir`, creating it if needed.
// Throws std::runtime_error when a file cannot be written.
void export_bundle(const MetricsBundle& bundle, const RunInfo& info, const std::string& dir);

}  // namespace evfleet::metrics
