#pragma once

// Multilayer perceptron weights and their file formats.
//
// Binary layout, little-endian throughout:
//   "EVFW"                      magic
//   u32 version                 currently 1
//   u32 vehicle count
//   u32 layer count L
//   u32 widths[L + 1]           input width first
//   L x (u32 n, n bytes)        activation name per layer
//   u32 n, n bytes              observation transform ("none")
//   L x (f64 weights[rows*cols] row-major, rows = output width; f64 bias[rows])
//
// The text twin carries the same fields, one keyword per line.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evfleet::policy {

enum class Activation { Identity, Tanh, Sigmoid, Relu };
const char* to_string(Activation activation);
Activation parse_activation(const std::string& name);  // ConfigError on unknown names
double apply(Activation activation, double x);

struct Layer {
  int rows = 0;  // output width
  int cols = 0;  // input width
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::Tanh;
};

struct PolicyWeights {
  int num_vehicles = 0;
  std::vector<Layer> layers;
  std::string observation_transform = "none";

  std::vector<int> widths() const;
  // Empty when shapes chain, sizes match and all values are finite.
  std::string check() const;
  // Also requires input and output width 2 * num_vehicles.
  std::string check_for(int num_vehicles) const;

  // 2n -> hidden... -> 2n with tanh hidden layers and a sigmoid output.
  static PolicyWeights zeros(int num_vehicles, const std::vector<int>& hidden = {64, 64});
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static PolicyWeights random(int num_vehicles, std::uint64_t seed, const std::vector<int>& hidden = {64, 64});
};

inline constexpr std::uint32_t kWeightsVersion = 1;

void write_weights_binary(std::ostream& out, const PolicyWeights& weights);
void write_weights_text(std::ostream& out, const PolicyWeights& weights);
PolicyWeights read_weights_binary(std::istream& in);
PolicyWeights read_weights_text(std::istream& in);

// Detects the format from the leading bytes. Throws ConfigError on a missing
// file, a malformed file or a failed check().
PolicyWeights load_weights(const std::string& path);
// Text when the path ends in ".txt", binary otherwise.
void save_weights(const std::string& path, const PolicyWeights& weights);

}  // namespace evfleet::policy
