#pragma once

// Zone-to-zone travel model fitted from trip records.
//
// Each sufficiently observed ordered zone pair gets a product-Gaussian kernel
// density estimate over (duration, distance). Pairs without enough data are
// reached through the least-expected-duration path over the directly
// observed pairs; their draws are sums of independent per-leg draws.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evfleet/rng.hpp"
#include "evfleet/types.hpp"

namespace evfleet::traffic {

struct Leg {
  double duration_h = 0.0;
  double distance_km = 0.0;
};

struct TravelDistribution {
  std::vector<Leg> samples;  // kernel centres
  double bandwidth_duration = 0.0;
  double bandwidth_distance = 0.0;
  Leg mean;                  // mean of all training rows, not only the retained centres
  std::size_t observations = 0;

  // Point mass at a single leg.
  static TravelDistribution point(Leg leg);
};

struct FitOptions {
  std::size_t min_pair_count = 5;
  double bandwidth_scale = 1.0;
  // Kernel centres kept per pair (reservoir); the mean and bandwidth still use every row.
  std::size_t max_samples_per_pair = 4096;
  Leg intra_zone_fallback{0.1, 1.0};
  std::vector<ZoneId> extra_zones;  // e.g. station zones absent from trips
  std::uint64_t seed = 0x5eed;
};

struct SampleOptions {
  int retries = 16;
  double min_duration_h = 1e-3;
  double min_distance_km = 1e-2;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::vector<std::pair<ZoneId, ZoneId>> unreachable,
           std::vector<ZoneId> isolated)
      : std::runtime_error(what), unreachable_(std::move(unreachable)), isolated_(std::move(isolated)) {}
  const std::vector<std::pair<ZoneId, ZoneId>>& unreachable() const { return unreachable_; }
  const std::vector<ZoneId>& isolated() const { return isolated_; }

 private:
  std::vector<std::pair<ZoneId, ZoneId>> unreachable_;
  std::vector<ZoneId> isolated_;
};

struct FitStats {
  std::size_t records_seen = 0;
  std::size_t records_filtered = 0;
  std::size_t direct_pairs = 0;
  std::size_t composite_pairs = 0;
  std::size_t sparse_pairs = 0;  // observed but below min_pair_count
};

class TrafficModel {
 public:
  TrafficModel() = default;

  const std::vector<ZoneId>& zones() const { return zones_; }
  bool has_zone(ZoneId zone) const;
  bool is_direct(ZoneId from, ZoneId to) const;
  // Composite route including both endpoints; empty for direct pairs.
  const std::vector<ZoneId>& path(ZoneId from, ZoneId to) const;
  const TravelDistribution& direct(ZoneId from, ZoneId to) const;

  Leg expected(ZoneId from, ZoneId to) const;
  Leg sample(ZoneId from, ZoneId to, Rng& rng) const;

  const SampleOptions& sample_options() const { return sample_options_; }
  void set_sample_options(const SampleOptions& options) { sample_options_ = options; }
  const FitStats& stats() const { return stats_; }

  // Structured-text cache, versioned and tagged with the dataset hash.
  void save(std::ostream& out, const std::string& dataset_hash) const;
  // Returns the stored dataset hash.
  static std::pair<TrafficModel, std::string> load(std::istream& in);

  // Builds a model from already fitted distributions. Every zone pair must be
  // resolvable; otherwise FitError.
  static TrafficModel from_direct(std::vector<ZoneId> zones,
                                  std::map<std::pair<ZoneId, ZoneId>, TravelDistribution> direct,
                                  FitStats stats = {});

 private:
  std::size_t index_of(ZoneId zone) const;
  Leg sample_direct(const TravelDistribution& dist, Rng& rng) const;
  void resolve_paths();

  std::vector<ZoneId> zones_;  // sorted
  std::map<std::pair<ZoneId, ZoneId>, TravelDistribution> direct_;
  std::map<std::pair<ZoneId, ZoneId>, std::vector<ZoneId>> composite_;
  std::vector<Leg> expected_;  // dense, zones_.size()^2
  SampleOptions sample_options_;
  FitStats stats_;
};

// Streaming fitter: feed records one by one, then finish().
class TrafficFitter {
 public:
  explicit TrafficFitter(FitOptions options);
  void add(const TripRecord& record);
  TrafficModel finish() const;

 private:
  struct PairAccumulator {
    std::vector<Leg> reservoir;
    std::size_t count = 0;
    // Welford running moments per dimension.
    double mean_d = 0.0, m2_d = 0.0;
    double mean_x = 0.0, m2_x = 0.0;
  };
  FitOptions options_;
  Rng rng_;
  std::map<std::pair<ZoneId, ZoneId>, PairAccumulator> pairs_;
  std::vector<ZoneId> zones_;
  FitStats stats_;
};

// Silverman's normal-reference bandwidth 1.06 * sd * n^(-1/5); 0 for n < 2.
double silverman_bandwidth(double sample_sd, std::size_t n);

TrafficModel fit_from_trips(std::span<const TripRecord> records, const FitOptions& options);
Leg sample_leg(const TrafficModel& model, ZoneId start, ZoneId end, Rng& rng);
Leg expected_leg(const TrafficModel& model, ZoneId start, ZoneId end);

}  // namespace evfleet::traffic
