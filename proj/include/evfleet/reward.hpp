#pragma once

#include <vector>

namespace evfleet::policy {

// Weights of the per-tick reward
//   r(t) = completions(t) - lambda * sum_v capacity_loss_v(t)
//          - penalty_weight * max(0, grid_power(t) - delta_kw)
struct RewardConfig {
  double lambda = 100.0;        // per kWh of capacity lost
  double delta_kw = 500.0;      // soft cap on total fleet charging power
  double penalty_weight = 1.0;  // per kW above delta_kw
};

struct TickOutcome {
  int completions = 0;
  std::vector<double> capacity_loss_kwh;  // one entry per vehicle
  double grid_power_kw = 0.0;             // average power drawn over the tick
};

double reward_step(const TickOutcome& outcome, const RewardConfig& config);

// The three reward terms, for logging and tests.
struct RewardTerms {
  double completions = 0.0;
  double degradation = 0.0;
  double power_penalty = 0.0;
  double total() const { return completions - degradation - power_penalty; }
};
RewardTerms reward_terms(const TickOutcome& outcome, const RewardConfig& config);

}  // namespace evfleet::policy
