#include "evfleet/battery.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evfleet::battery {

const StageParams& stage_for_soh(double soh_fraction, const AgingConstants& constants) {
  if (!(soh_fraction >= 0.0 && soh_fraction <= 1.0)) {
    throw std::domain_error("state of health " + std::to_string(soh_fraction) +
                            " outside [0, 1]");
  }
  // Strict comparison puts boundary values in the next stage down.
  if (soh_fraction > constants.stages[0].soh_lower) return constants.stages[0];
  if (soh_fraction > constants.stages[1].soh_lower) return constants.stages[1];
  return constants.stages[2];
}

const StageParams& stage_for_soh(double soh_fraction) {
  static const AgingConstants defaults{};
  return stage_for_soh(soh_fraction, defaults);
}

double arrhenius_factor(double psi, double temperature_k, double t_ref_k) {
  return std::exp(-psi * (1.0 / temperature_k - 1.0 / t_ref_k));
}

double capacity_loss_step(const BatteryState& state, const RateSignal& rate,
                          const AgingConstants& constants) {
  if (rate.c_rate == 0.0 || state.capacity <= 0.0) return 0.0;
  // Capacity can only shrink, so a tiny excursion past Q0 is rounding.
  const double soh = std::min(state.soh(), 1.0);
  const StageParams& stage = stage_for_soh(soh, constants);

  const double depth = std::clamp(1.0 - state.soc / state.capacity, constants.soc_clamp, 1.0);
  const double depth_factor = std::pow(depth, -1.0 / stage.alpha);
  const double rate_factor = std::pow(2.0 * std::abs(rate.c_rate) / rate.duration, -1.0 / stage.beta);
  const double temp_factor = arrhenius_factor(stage.psi, state.temperature_k, constants.t_ref_k);

  const double fraction = depth_factor * rate_factor * temp_factor / constants.n_cref;
  return fraction * state.initial_capacity;
}

double capacity_loss_step(const BatteryState& state, const RateSignal& rate) {
  static const AgingConstants defaults{};
  return capacity_loss_step(state, rate, defaults);
}

SocUpdate apply_soc_delta(const BatteryState& state, const RateSignal& rate) {
  SocUpdate out{state, 0.0, 0.0};
  const double target = state.soc + rate.c_rate * state.capacity * rate.duration;
  if (target > state.capacity) {
    out.overflow = target - state.capacity;
    out.state.soc = state.capacity;
  } else if (target < 0.0) {
    out.shortfall = -target;
    out.state.soc = 0.0;
  } else {
    out.state.soc = target;
  }
  return out;
}

BatteryState apply_capacity_loss(const BatteryState& state, double loss) {
  if (loss < 0.0) throw std::domain_error("negative capacity loss");
  if (loss > state.capacity) {
    throw std::domain_error("capacity loss " + std::to_string(loss) +
                            " kWh exceeds remaining capacity " +
                            std::to_string(state.capacity) + " kWh");
  }
  BatteryState out = state;
  out.capacity = state.capacity - loss;
  out.soc = std::min(state.soc, out.capacity);
  return out;
}

}  // namespace evfleet::battery
