#pragma once

// Multi-stage thermal-aging battery model.
//
// Per-tick capacity loss is
//
//   loss = Q0 / N_cref
//        * clamp(1 - soc/capacity, eps, 1) ^ (-1/alpha)
//        * (2 |c| / dt) ^ (-1/beta)
//        * exp(-psi * (1/T - 1/T_ref))
//
// with (alpha, beta, psi) picked from the stage containing the current
// state of health capacity/Q0. The dimensionless product is a fraction of
// the initial capacity Q0; multiplying by Q0 yields kWh.

#include <array>
#include <stdexcept>

namespace evfleet::battery {

struct StageParams {
  int index = 1;          // 1..3, higher is more degraded
  double soh_lower = 0.0;  // exclusive lower bound, except stage 3 which reaches 0
  double soh_upper = 1.0;  // inclusive upper bound
  double alpha = 1.0;
  double beta = 1.0;
  double psi = 0.0;  // Arrhenius rate constant [K]
};

inline constexpr double kStage12Boundary = 0.933;
inline constexpr double kStage23Boundary = 0.866;

inline constexpr std::array<StageParams, 3> kDefaultStages{{
    {1, kStage12Boundary, 1.0, 0.2171, 24.2535, -12.0051},
    {2, kStage23Boundary, kStage12Boundary, 0.2652, 9.9653, -29.0049},
    {3, 0.0, kStage23Boundary, 0.2611, -15.1963, -22.5247},
}};

struct AgingConstants {
  double n_cref = 513.0;     // reference cycles to end of life
  double t_ref_k = 298.15;   // 25 degC
  double soc_clamp = 1e-3;   // lower clamp on (1 - soc/capacity)
  std::array<StageParams, 3> stages = kDefaultStages;
};

// soc <= capacity <= initial_capacity, all in kWh.
struct BatteryState {
  double soc = 0.0;
  double capacity = 0.0;
  double initial_capacity = 0.0;
  double temperature_k = 298.15;

  double soh() const { return initial_capacity > 0.0 ? capacity / initial_capacity : 0.0; }
  double soc_fraction() const { return capacity > 0.0 ? soc / capacity : 0.0; }
};

// c_rate in capacity multiples per hour (positive charges), duration in hours.
struct RateSignal {
  double c_rate = 0.0;
  double duration = 1.0;
};

// Stage containing soh_fraction. Boundary values belong to the more
// degraded stage. Throws std::domain_error outside [0, 1].
const StageParams& stage_for_soh(double soh_fraction, const AgingConstants& constants);
const StageParams& stage_for_soh(double soh_fraction);

// Arrhenius temperature factor; exactly 1 at T == T_ref.
double arrhenius_factor(double psi, double temperature_k, double t_ref_k);

// Capacity lost over one tick [kWh], always >= 0 and exactly 0 at zero rate.
double capacity_loss_step(const BatteryState& state, const RateSignal& rate,
                          const AgingConstants& constants);
double capacity_loss_step(const BatteryState& state, const RateSignal& rate);

struct SocUpdate {
  BatteryState state;
  double overflow = 0.0;   // energy refused because the pack was full [kWh]
  double shortfall = 0.0;  // energy demanded beyond an empty pack [kWh]
};

// soc' = clamp(soc + c_rate * capacity * duration, 0, capacity).
SocUpdate apply_soc_delta(const BatteryState& state, const RateSignal& rate);

// capacity' = capacity - loss, soc re-clamped. Throws std::domain_error
// when loss is negative or exceeds the remaining capacity.
BatteryState apply_capacity_loss(const BatteryState& state, double loss);

}  // namespace evfleet::battery
