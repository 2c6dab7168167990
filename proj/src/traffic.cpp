#include "evfleet/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <set>

#include <json.hpp>

namespace evfleet::traffic {

namespace {

using PairKey = std::pair<ZoneId, ZoneId>;
constexpr int kCacheVersion = 1;
const std::vector<ZoneId> kNoPath;

}  // namespace

TravelDistribution TravelDistribution::point(Leg leg) {
  TravelDistribution d;
  d.samples = {leg};
  d.mean = leg;
  d.observations = 1;
  return d;
}

double silverman_bandwidth(double sample_sd, std::size_t n) {
  if (n < 2) return 0.0;
  return 1.06 * sample_sd * std::pow(static_cast<double>(n), -0.2);
}

// ---------------------------------------------------------------------------
// TrafficModel

bool TrafficModel::has_zone(ZoneId zone) const {
  return std::binary_search(zones_.begin(), zones_.end(), zone);
}

std::size_t TrafficModel::index_of(ZoneId zone) const {
  auto it = std::lower_bound(zones_.begin(), zones_.end(), zone);
  if (it == zones_.end() || *it != zone) {
    throw std::out_of_range("zone " + std::to_string(zone) + " is not in the traffic model");
  }
  return static_cast<std::size_t>(it - zones_.begin());
}

bool TrafficModel::is_direct(ZoneId from, ZoneId to) const {
  return direct_.count({from, to}) != 0;
}

const std::vector<ZoneId>& TrafficModel::path(ZoneId from, ZoneId to) const {
  auto it = composite_.find({from, to});
  return it == composite_.end() ? kNoPath : it->second;
}

const TravelDistribution& TrafficModel::direct(ZoneId from, ZoneId to) const {
  auto it = direct_.find({from, to});
  if (it == direct_.end()) {
    throw std::out_of_range("no direct distribution for " + std::to_string(from) + "->" +
                            std::to_string(to));
  }
  return it->second;
}

Leg TrafficModel::expected(ZoneId from, ZoneId to) const {
  return expected_[index_of(from) * zones_.size() + index_of(to)];
}

Leg TrafficModel::sample_direct(const TravelDistribution& dist, Rng& rng) const {
  const auto& opts = sample_options_;
  std::uniform_int_distribution<std::size_t> pick(0, dist.samples.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  Leg leg{};
  for (int attempt = 0; attempt <= opts.retries; ++attempt) {
    const Leg& centre = dist.samples[pick(rng)];
    leg.duration_h = centre.duration_h + dist.bandwidth_duration * noise(rng);
    leg.distance_km = centre.distance_km + dist.bandwidth_distance * noise(rng);
    if (leg.duration_h > 0.0 && leg.distance_km > 0.0) return leg;
  }
  leg.duration_h = std::max(leg.duration_h, opts.min_duration_h);
  leg.distance_km = std::max(leg.distance_km, opts.min_distance_km);
  return leg;
}

Leg TrafficModel::sample(ZoneId from, ZoneId to, Rng& rng) const {
  if (auto it = direct_.find({from, to}); it != direct_.end()) {
    return sample_direct(it->second, rng);
  }
  const auto& route = path(from, to);
  if (route.size() < 2) {
    throw std::out_of_range("no route " + std::to_string(from) + "->" + std::to_string(to));
  }
  Leg total{};
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    const Leg leg = sample_direct(direct_.at({route[i], route[i + 1]}), rng);
    total.duration_h += leg.duration_h;
    total.distance_km += leg.distance_km;
  }
  return total;
}

TrafficModel TrafficModel::from_direct(std::vector<ZoneId> zones,
                                       std::map<PairKey, TravelDistribution> direct,
                                       FitStats stats) {
  TrafficModel model;
  std::sort(zones.begin(), zones.end());
  zones.erase(std::unique(zones.begin(), zones.end()), zones.end());
  model.zones_ = std::move(zones);
  model.direct_ = std::move(direct);
  for (const auto& [key, dist] : model.direct_) {
    if (!model.has_zone(key.first) || !model.has_zone(key.second)) {
      throw std::invalid_argument("direct distribution references unknown zone");
    }
    if (dist.samples.empty()) throw std::invalid_argument("direct distribution without samples");
  }
  model.stats_ = stats;
  model.resolve_paths();
  return model;
}

void TrafficModel::resolve_paths() {
  const std::size_t n = zones_.size();
  expected_.assign(n * n, Leg{});
  composite_.clear();

  // Adjacency over directly connected, distinct zones.
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& [key, dist] : direct_) {
    if (key.first == key.second) continue;
    adj[index_of(key.first)].push_back({index_of(key.second), dist.mean.duration_h});
  }

  std::vector<PairKey> unreachable;
  std::set<ZoneId> isolated;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n);
  std::vector<std::size_t> prev(n);

  for (std::size_t src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(prev.begin(), prev.end(), n);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
    dist[src] = 0.0;
    frontier.push({0.0, src});
    while (!frontier.empty()) {
      auto [d, u] = frontier.top();
      frontier.pop();
      if (d > dist[u]) continue;
      for (auto [v, w] : adj[u]) {
        const double nd = d + w;
        if (nd < dist[v]) {
          dist[v] = nd;
          prev[v] = u;
          frontier.push({nd, v});
        }
      }
    }

    for (std::size_t dst = 0; dst < n; ++dst) {
      const ZoneId a = zones_[src];
      const ZoneId b = zones_[dst];
      if (auto it = direct_.find({a, b}); it != direct_.end()) {
        expected_[src * n + dst] = it->second.mean;
        continue;
      }
      if (src == dst) {
        // Missing intra-zone data is filled by the fitter; reaching here means
        // the model was built by hand without one.
        unreachable.push_back({a, b});
        continue;
      }
      if (dist[dst] == kInf) {
        unreachable.push_back({a, b});
        if (adj[src].empty()) isolated.insert(a);
        continue;
      }
      std::vector<ZoneId> route;
      for (std::size_t at = dst; at != n; at = prev[at]) route.push_back(zones_[at]);
      std::reverse(route.begin(), route.end());
      Leg sum{};
      for (std::size_t i = 0; i + 1 < route.size(); ++i) {
        const Leg m = direct_.at({route[i], route[i + 1]}).mean;
        sum.duration_h += m.duration_h;
        sum.distance_km += m.distance_km;
      }
      expected_[src * n + dst] = sum;
      composite_.emplace(PairKey{a, b}, std::move(route));
    }
  }

  // A zone with no inbound edges is as cut off as one without outbound edges.
  for (std::size_t dst = 0; dst < n; ++dst) {
    bool inbound = false;
    for (std::size_t src = 0; src < n && !inbound; ++src) {
      for (auto [v, w] : adj[src]) {
        if (v == dst) { inbound = true; break; }
      }
    }
    if (!inbound && n > 1) isolated.insert(zones_[dst]);
  }

  stats_.direct_pairs = direct_.size();
  stats_.composite_pairs = composite_.size();

  if (!unreachable.empty()) {
    std::string msg = "traffic graph is disconnected: " + std::to_string(unreachable.size()) +
                      " unreachable zone pairs";
    if (!isolated.empty()) {
      msg += "; isolated zones:";
      for (ZoneId z : isolated) msg += " " + std::to_string(z);
    }
    msg += "; first pairs:";
    for (std::size_t i = 0; i < std::min<std::size_t>(unreachable.size(), 10); ++i) {
      msg += " " + std::to_string(unreachable[i].first) + "->" + std::to_string(unreachable[i].second);
    }
    throw FitError(msg, std::move(unreachable), {isolated.begin(), isolated.end()});
  }
}

void TrafficModel::save(std::ostream& out, const std::string& dataset_hash) const {
  nlohmann::json j;
  j["format"] = "evfleet-traffic";
  j["version"] = kCacheVersion;
  j["dataset_hash"] = dataset_hash;
  j["zones"] = zones_;
  auto& direct = j["direct"] = nlohmann::json::array();
  for (const auto& [key, d] : direct_) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : d.samples) samples.push_back({s.duration_h, s.distance_km});
    direct.push_back({{"from", key.first},
                      {"to", key.second},
                      {"bandwidth", {d.bandwidth_duration, d.bandwidth_distance}},
                      {"mean", {d.mean.duration_h, d.mean.distance_km}},
                      {"observations", d.observations},
                      {"samples", std::move(samples)}});
  }
  // Composite paths are derived data; stored so readers can inspect them.
  auto& comp = j["composite"] = nlohmann::json::array();
  for (const auto& [key, route] : composite_) {
    comp.push_back({{"from", key.first}, {"to", key.second}, {"path", route}});
  }
  j["stats"] = {{"records_seen", stats_.records_seen},
                {"records_filtered", stats_.records_filtered},
                {"sparse_pairs", stats_.sparse_pairs}};
  out << j.dump() << '\n';
}

std::pair<TrafficModel, std::string> TrafficModel::load(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("traffic cache is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "evfleet-traffic" || j.value("version", 0) != kCacheVersion) {
    throw std::runtime_error("traffic cache has an unsupported format or version");
  }
  std::map<PairKey, TravelDistribution> direct;
  for (const auto& e : j.at("direct")) {
    TravelDistribution d;
    for (const auto& s : e.at("samples")) d.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    d.bandwidth_duration = e.at("bandwidth").at(0).get<double>();
    d.bandwidth_distance = e.at("bandwidth").at(1).get<double>();
    d.mean = {e.at("mean").at(0).get<double>(), e.at("mean").at(1).get<double>()};
    d.observations = e.at("observations").get<std::size_t>();
    direct.emplace(PairKey{e.at("from").get<ZoneId>(), e.at("to").get<ZoneId>()}, std::move(d));
  }
  FitStats stats;
  if (j.contains("stats")) {
    stats.records_seen = j["stats"].value("records_seen", std::size_t{0});
    stats.records_filtered = j["stats"].value("records_filtered", std::size_t{0});
    stats.sparse_pairs = j["stats"].value("sparse_pairs", std::size_t{0});
  }
  auto model = from_direct(j.at("zones").get<std::vector<ZoneId>>(), std::move(direct), stats);
  return {std::move(model), j.value("dataset_hash", "")};
}

// ---------------------------------------------------------------------------
// Fitting

TrafficFitter::TrafficFitter(FitOptions options) : options_(std::move(options)), rng_(options_.seed) {
  zones_ = options_.extra_zones;
}

void TrafficFitter::add(const TripRecord& record) {
  ++stats_.records_seen;
  const double duration = record.duration_hours();
  if (!(duration > 0.0) || !(record.distance_km > 0.0)) {
    ++stats_.records_filtered;
    return;
  }
  zones_.push_back(record.pickup_zone);
  zones_.push_back(record.dropoff_zone);
  // Keep the zone list from growing with every row.
  if (zones_.size() > 4096) {
    std::sort(zones_.begin(), zones_.end());
    zones_.erase(std::unique(zones_.begin(), zones_.end()), zones_.end());
  }

  auto& acc = pairs_[{record.pickup_zone, record.dropoff_zone}];
  ++acc.count;
  const double n = static_cast<double>(acc.count);
  const double dd = duration - acc.mean_d;
  acc.mean_d += dd / n;
  acc.m2_d += dd * (duration - acc.mean_d);
  const double dx = record.distance_km - acc.mean_x;
  acc.mean_x += dx / n;
  acc.m2_x += dx * (record.distance_km - acc.mean_x);

  const Leg leg{duration, record.distance_km};
  if (acc.reservoir.size() < options_.max_samples_per_pair) {
    acc.reservoir.push_back(leg);
  } else {
    std::uniform_int_distribution<std::size_t> slot(0, acc.count - 1);
    const std::size_t k = slot(rng_);
    if (k < acc.reservoir.size()) acc.reservoir[k] = leg;
  }
}

TrafficModel TrafficFitter::finish() const {
  std::vector<ZoneId> zones = zones_;
  std::sort(zones.begin(), zones.end());
  zones.erase(std::unique(zones.begin(), zones.end()), zones.end());

  FitStats stats = stats_;
  std::map<PairKey, TravelDistribution> direct;
  for (const auto& [key, acc] : pairs_) {
    if (acc.count < options_.min_pair_count) {
      ++stats.sparse_pairs;
      continue;
    }
    TravelDistribution d;
    d.samples = acc.reservoir;
    d.observations = acc.count;
    d.mean = {acc.mean_d, acc.mean_x};
    const double denom = static_cast<double>(acc.count - 1);
    const double sd_d = acc.count > 1 ? std::sqrt(acc.m2_d / denom) : 0.0;
    const double sd_x = acc.count > 1 ? std::sqrt(acc.m2_x / denom) : 0.0;
    d.bandwidth_duration = options_.bandwidth_scale * silverman_bandwidth(sd_d, acc.count);
    d.bandwidth_distance = options_.bandwidth_scale * silverman_bandwidth(sd_x, acc.count);
    direct.emplace(key, std::move(d));
  }
  for (ZoneId z : zones) {
    if (!direct.count({z, z})) direct.emplace(PairKey{z, z}, TravelDistribution::point(options_.intra_zone_fallback));
  }
  return TrafficModel::from_direct(std::move(zones), std::move(direct), stats);
}

TrafficModel fit_from_trips(std::span<const TripRecord> records, const FitOptions& options) {
  TrafficFitter fitter(options);
  for (const auto& r : records) fitter.add(r);
  return fitter.finish();
}

Leg sample_leg(const TrafficModel& model, ZoneId start, ZoneId end, Rng& rng) {
  return model.sample(start, end, rng);
}

Leg expected_leg(const TrafficModel& model, ZoneId start, ZoneId end) {
  return model.expected(start, end);
}

}  // namespace evfleet::traffic
