#include <algorithm>
#include <cmath>

#include "evfleet/policy.hpp"

namespace evfleet::policy {

using sim::VehicleState;

std::vector<double> observation(const Snapshot& snapshot) {
  std::vector<double> x;
  x.reserve(2 * snapshot.vehicles.size());
  for (const auto& v : snapshot.vehicles) {
    x.push_back(v.soh());
    x.push_back(v.soc_fraction());
  }
  return x;
}

std::vector<double> forward(const PolicyWeights& weights, const std::vector<double>& input) {
  std::vector<double> x = input;
  for (const auto& layer : weights.layers) {
    if (static_cast<int>(x.size()) != layer.cols) {
      throw ConfigError("network input has width " + std::to_string(x.size()) + ", layer expects " +
                        std::to_string(layer.cols));
    }
    std::vector<double> y(static_cast<std::size_t>(layer.rows));
    for (int r = 0; r < layer.rows; ++r) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.cols);
      double acc = layer.bias[static_cast<std::size_t>(r)];
      for (int c = 0; c < layer.cols; ++c) acc += w[c] * x[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = apply(layer.activation, acc);
    }
    x = std::move(y);
  }
  return x;
}

Schedule route_actions(const Snapshot& snapshot, const std::vector<double>& decisions,
                       const std::vector<double>& rates) {
  const std::size_t n = snapshot.vehicles.size();
  if (decisions.size() != n || rates.size() != n) {
    throw std::invalid_argument("expected " + std::to_string(n) + " decisions and rates, got " +
                                std::to_string(decisions.size()) + " and " + std::to_string(rates.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(decisions[i]) || !std::isfinite(rates[i])) {
      throw std::invalid_argument("non-finite decision or rate for vehicle " + std::to_string(i));
    }
  }

  Schedule out;
  std::vector<VehicleId> pool;
  std::vector<VehicleId> released;
  std::vector<double> headroom;
  for (const auto& st : snapshot.stations) headroom.push_back(st.max_power_kw);

  for (const auto& v : snapshot.vehicles) {
    if (v.retired) continue;
    const auto k = static_cast<std::size_t>(v.id);
    if (decisions[k] >= kDecisionThreshold) {
      if (!sim::is_preemptable(v.state)) continue;
      const bool has_station = v.state == VehicleState::Charging || v.state == VehicleState::ToCharger;
      const StationId s = has_station ? *v.station : nearest_station(snapshot, v.zone);
      const auto& st = snapshot.stations[static_cast<std::size_t>(s)];
      double rate = std::clamp(rates[k], 0.0, max_feasible_rate(v, st));
      if (v.state == VehicleState::Charging && v.capacity > 0.0) {
        double& room = headroom[static_cast<std::size_t>(s)];
        rate = std::min(rate, std::max(0.0, room) * st.efficiency / v.capacity);
        room -= rate * v.capacity / st.efficiency;
      }
      out.push_back({v.id, sim::Charge{s, rate}});
    } else if (v.state == VehicleState::Idle) {
      pool.push_back(v.id);
    } else if (v.state == VehicleState::Charging || v.state == VehicleState::ToCharger) {
      pool.push_back(v.id);
      released.push_back(v.id);
    }
  }

  Schedule matches;
  match_nearest(snapshot, pool, matches, false);
  std::vector<bool> matched(n, false);
  for (const auto& a : matches) matched[static_cast<std::size_t>(a.vehicle)] = true;
  out.insert(out.end(), matches.begin(), matches.end());
  for (VehicleId v : released) {
    if (!matched[static_cast<std::size_t>(v)]) out.push_back({v, sim::Idle{}});
  }
  return out;
}

NeuralPolicy::NeuralPolicy(PolicyWeights weights, int num_vehicles) : weights_(std::move(weights)) {
  if (auto problem = weights_.check_for(num_vehicles); !problem.empty()) throw ConfigError(problem);
}

Schedule NeuralPolicy::decide(const Snapshot& snapshot) {
  const auto y = forward(weights_, observation(snapshot));
  const std::size_t n = snapshot.vehicles.size();
  std::vector<double> decisions(n), rates(n);
  for (std::size_t i = 0; i < n; ++i) {
    decisions[i] = y[2 * i];
    rates[i] = y[2 * i + 1] * snapshot.vehicles[i].max_c_rate;
  }
  return route_actions(snapshot, decisions, rates);
}

}  // namespace evfleet::policy
