#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "evfleet/traffic.hpp"
#include "fixtures.hpp"

using namespace evfleet;
using namespace evfleet::traffic;

namespace {

struct RandomGraph {
  std::vector<ZoneId> zones;
  std::map<std::pair<ZoneId, ZoneId>, TravelDistribution> direct;
};

// Strongly connected through a ring, plus random chords.
RandomGraph random_graph(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomGraph g;
  const int n = size(rng);
  for (int i = 0; i < n; ++i) g.zones.push_back(10 + 3 * i);
  auto edge = [&](ZoneId a, ZoneId b) {
    g.direct[{a, b}] = TravelDistribution::point({0.05 + 2.0 * u(rng), 0.5 + 10.0 * u(rng)});
  };
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 0; i < n; ++i) {
    edge(g.zones[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])],
         g.zones[static_cast<std::size_t>(order[static_cast<std::size_t>((i + 1) % n)])]);
  }
  for (ZoneId a : g.zones) {
    g.direct[{a, a}] = TravelDistribution::point({0.1, 1.0});
    for (ZoneId b : g.zones) {
      if (a != b && !g.direct.count({a, b}) && u(rng) < 0.3) edge(a, b);
    }
  }
  return g;
}

// Least summed mean duration over every simple path, by exhaustive search.
double brute_force(const RandomGraph& g, ZoneId from, ZoneId to) {
  double best = std::numeric_limits<double>::infinity();
  std::set<ZoneId> seen{from};
  std::function<void(ZoneId, double)> walk = [&](ZoneId at, double cost) {
    if (at == to) {
      best = std::min(best, cost);
      return;
    }
    for (ZoneId next : g.zones) {
      if (next == at || seen.count(next)) continue;
      auto it = g.direct.find({at, next});
      if (it == g.direct.end()) continue;
      seen.insert(next);
      walk(next, cost + it->second.mean.duration_h);
      seen.erase(next);
    }
  };
  walk(from, 0.0);
  return best;
}

}  // namespace

TEST_CASE("least expected time paths match exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_graph(rng);
    const auto model = TrafficModel::from_direct(g.zones, g.direct);
    for (ZoneId a : g.zones) {
      for (ZoneId b : g.zones) {
        if (g.direct.count({a, b})) {
          CHECK(model.expected(a, b).duration_h == g.direct.at({a, b}).mean.duration_h);
          continue;
        }
        const double want = brute_force(g, a, b);
        const double got = model.expected(a, b).duration_h;
        CHECK(std::abs(got - want) <= 1e-12 * want);
        // The stored path is a real chain of direct legs with that cost.
        const auto& route = model.path(a, b);
        REQUIRE(route.size() >= 2);
        CHECK(route.front() == a);
        CHECK(route.back() == b);
        double cost = 0.0;
        for (std::size_t i = 0; i + 1 < route.size(); ++i) cost += g.direct.at({route[i], route[i + 1]}).mean.duration_h;
        CHECK(cost == doctest::Approx(got).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("silverman bandwidth") {
  CHECK(silverman_bandwidth(2.0, 0) == 0.0);
  CHECK(silverman_bandwidth(2.0, 1) == 0.0);
  CHECK(silverman_bandwidth(2.0, 32) == doctest::Approx(1.06 * 2.0 * std::pow(32.0, -0.2)));
}

TEST_CASE("fit keeps well observed pairs, routes sparse ones, and fills intra-zone legs") {
  std::vector<TripRecord> trips;
  const std::int64_t t0 = 1546300800;
  for (int i = 0; i < 6; ++i) {
    trips.push_back(fixtures::trip(t0 + i * 60, 0.2 + 0.01 * i, 1, 2, 3.0 + 0.1 * i, 5.0));
    trips.push_back(fixtures::trip(t0 + i * 60, 0.3, 2, 3, 4.0, 5.0));
    trips.push_back(fixtures::trip(t0 + i * 60, 0.3, 3, 1, 4.0, 5.0));
    trips.push_back(fixtures::trip(t0 + i * 60, 0.25, 2, 1, 3.0, 5.0));
  }
  trips.push_back(fixtures::trip(t0, 0.1, 1, 3, 2.0, 5.0));  // too rare to keep
  trips.push_back(fixtures::trip(t0, 0.0, 1, 3, 2.0, 5.0));  // zero duration, dropped

  FitOptions opts;
  opts.min_pair_count = 5;
  const auto model = fit_from_trips(trips, opts);
  CHECK(model.zones() == std::vector<ZoneId>{1, 2, 3});
  CHECK(model.is_direct(1, 2));
  CHECK_FALSE(model.is_direct(1, 3));
  CHECK(model.stats().sparse_pairs == 1);
  CHECK(model.stats().records_filtered == 1);

  double mean = 0.0;
  for (int i = 0; i < 6; ++i) mean += 0.2 + 0.01 * i;
  mean /= 6.0;
  CHECK(model.direct(1, 2).mean.duration_h == doctest::Approx(mean).epsilon(1e-9));
  CHECK(model.path(1, 3) == std::vector<ZoneId>{1, 2, 3});
  CHECK(model.expected(1, 3).duration_h == doctest::Approx(model.expected(1, 2).duration_h + 0.3));
  CHECK(model.expected(2, 2).duration_h == opts.intra_zone_fallback.duration_h);
  CHECK(model.expected(2, 2).distance_km == opts.intra_zone_fallback.distance_km);
}

TEST_CASE("an isolated zone is reported") {
  std::vector<TripRecord> trips;
  for (int i = 0; i < 5; ++i) {
    trips.push_back(fixtures::trip(1546300800, 0.2, 1, 2, 3.0, 5.0));
    trips.push_back(fixtures::trip(1546300800, 0.2, 2, 1, 3.0, 5.0));
  }
  trips.push_back(fixtures::trip(1546300800, 0.2, 7, 1, 3.0, 5.0));
  try {
    fit_from_trips(trips, FitOptions{});
    FAIL("expected a fit error");
  } catch (const FitError& e) {
    CHECK(std::find(e.isolated().begin(), e.isolated().end(), 7) != e.isolated().end());
    CHECK_FALSE(e.unreachable().empty());
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("kernel draws reproduce the fitted mean") {
  std::vector<TripRecord> trips;
  std::mt19937_64 gen(5);
  std::normal_distribution<double> dur(0.5, 0.05), km(8.0, 0.6);
  for (int i = 0; i < 400; ++i) {
    trips.push_back(fixtures::trip(1546300800, std::max(0.3, dur(gen)), 1, 2, std::max(5.0, km(gen)), 9.0));
    trips.push_back(fixtures::trip(1546300800, std::max(0.3, dur(gen)), 2, 1, std::max(5.0, km(gen)), 9.0));
  }
  const auto model = fit_from_trips(trips, FitOptions{});
  const auto& d = model.direct(1, 2);
  CHECK(d.bandwidth_duration > 0.0);
  Rng rng(11);
  double sum_h = 0.0, sum_km = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto leg = model.sample(1, 2, rng);
    CHECK(leg.duration_h > 0.0);
    sum_h += leg.duration_h;
    sum_km += leg.distance_km;
  }
  // Standard error of the mean is well below these tolerances.
  CHECK(sum_h / n == doctest::Approx(d.mean.duration_h).epsilon(0.01));
  CHECK(sum_km / n == doctest::Approx(d.mean.distance_km).epsilon(0.01));
}

TEST_CASE("sampling is reproducible from the seed") {
  const auto model = fixtures::line_traffic(5);
  std::vector<TripRecord> trips;
  for (int i = 0; i < 50; ++i) trips.push_back(fixtures::trip(1546300800, 0.2 + 0.01 * (i % 7), 1 + i % 3, 1 + (i + 1) % 3, 2.0 + i % 5, 4.0));
  const auto fitted = fit_from_trips(trips, FitOptions{});
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    const auto x = fitted.sample(1, 3, a);
    const auto y = fitted.sample(1, 3, b);
    CHECK(x.duration_h == y.duration_h);
    CHECK(x.distance_km == y.distance_km);
  }
}

TEST_CASE("composite draws sum their legs") {
  std::vector<ZoneId> zones{1, 2, 3};
  std::map<std::pair<ZoneId, ZoneId>, TravelDistribution> direct;
  for (ZoneId z : zones) direct[{z, z}] = TravelDistribution::point({0.1, 1.0});
  direct[{1, 2}] = TravelDistribution::point({0.4, 5.0});
  direct[{2, 3}] = TravelDistribution::point({0.7, 6.0});
  direct[{3, 1}] = TravelDistribution::point({1.0, 9.0});
  const auto model = TrafficModel::from_direct(zones, direct);
  Rng rng(1);
  const auto leg = model.sample(1, 3, rng);
  CHECK(leg.duration_h == doctest::Approx(1.1));
  CHECK(leg.distance_km == doctest::Approx(11.0));
  CHECK(model.path(3, 2) == std::vector<ZoneId>{3, 1, 2});
}

TEST_CASE("cache round trip preserves the model") {
  std::vector<TripRecord> trips;
  for (int i = 0; i < 60; ++i) {
    trips.push_back(fixtures::trip(1546300800, 0.2 + 0.013 * (i % 9), 1 + i % 4, 1 + (i % 4 + 1 + (i / 4) % 3) % 4, 1.5 + 0.7 * (i % 5), 4.0));
  }
  const auto model = fit_from_trips(trips, FitOptions{});
  std::stringstream buf;
  model.save(buf, "abc123");
  const auto [loaded, hash] = TrafficModel::load(buf);
  CHECK(hash == "abc123");
  CHECK(loaded.zones() == model.zones());
  Rng a(4), b(4);
  for (ZoneId x : model.zones()) {
    for (ZoneId y : model.zones()) {
      CHECK(loaded.expected(x, y).duration_h == model.expected(x, y).duration_h);
      CHECK(loaded.expected(x, y).distance_km == model.expected(x, y).distance_km);
      const auto p = model.sample(x, y, a);
      const auto q = loaded.sample(x, y, b);
      CHECK(p.duration_h == q.duration_h);
      CHECK(p.distance_km == q.distance_km);
    }
  }
}

TEST_CASE("reservoir bounds the stored kernel centres") {
  std::vector<TripRecord> trips;
  for (int i = 0; i < 300; ++i) {
    trips.push_back(fixtures::trip(1546300800, 0.2 + 0.001 * i, 1, 2, 3.0, 4.0));
    trips.push_back(fixtures::trip(1546300800, 0.2, 2, 1, 3.0, 4.0));
  }
  FitOptions opts;
  opts.max_samples_per_pair = 50;
  const auto model = fit_from_trips(trips, opts);
  CHECK(model.direct(1, 2).samples.size() == 50);
  CHECK(model.direct(1, 2).observations == 300);
  double mean = 0.0;
  for (const auto& t : trips) {
    if (t.pickup_zone == 1) mean += t.duration_hours();
  }
  CHECK(model.direct(1, 2).mean.duration_h == doctest::Approx(mean / 300.0).epsilon(1e-12));
}
