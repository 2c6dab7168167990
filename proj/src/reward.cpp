#include "evfleet/reward.hpp"

#include <algorithm>

namespace evfleet::policy {

RewardTerms reward_terms(const TickOutcome& outcome, const RewardConfig& config) {
  RewardTerms t;
  t.completions = static_cast<double>(outcome.completions);
  double loss = 0.0;
  for (double l : outcome.capacity_loss_kwh) loss += l;
  t.degradation = config.lambda * loss;
  t.power_penalty = config.penalty_weight * std::max(0.0, outcome.grid_power_kw - config.delta_kw);
  return t;
}

double reward_step(const TickOutcome& outcome, const RewardConfig& config) {
  return reward_terms(outcome, config).total();
}

}  // namespace evfleet::policy
