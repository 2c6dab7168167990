#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "evfleet/rng.hpp"
#include "evfleet/types.hpp"
#include "evfleet/util.hpp"
#include "evfleet/weights.hpp"

namespace evfleet::policy {

const char* to_string(Activation activation) {
  switch (activation) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + name + "'");
}

double apply(Activation activation, double x) {
  switch (activation) {
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

std::vector<int> PolicyWeights::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().cols);
  for (const auto& l : layers) w.push_back(l.rows);
  return w;
}

std::string PolicyWeights::check() const {
  if (layers.empty()) return "network has no layers";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string name = "layer " + std::to_string(i);
    if (l.rows <= 0 || l.cols <= 0) return name + " has a non-positive dimension";
    if (l.weights.size() != static_cast<std::size_t>(l.rows) * static_cast<std::size_t>(l.cols)) {
      return name + " weight matrix has " + std::to_string(l.weights.size()) + " entries, expected " +
             std::to_string(l.rows) + "x" + std::to_string(l.cols);
    }
    if (l.bias.size() != static_cast<std::size_t>(l.rows)) return name + " bias length does not match its rows";
    if (i > 0 && layers[i - 1].rows != l.cols) {
      return name + " expects input width " + std::to_string(l.cols) + " but the previous layer emits " +
             std::to_string(layers[i - 1].rows);
    }
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(l.weights.begin(), l.weights.end(), finite) || !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
      return name + " has non-finite values";
    }
  }
  return {};
}

std::string PolicyWeights::check_for(int n) const {
  if (auto problem = check(); !problem.empty()) return problem;
  if (num_vehicles != n) {
    return "weights are for " + std::to_string(num_vehicles) + " vehicles, fleet has " + std::to_string(n);
  }
  if (layers.front().cols != 2 * n || layers.back().rows != 2 * n) {
    return "network must map " + std::to_string(2 * n) + " inputs to " + std::to_string(2 * n) + " outputs";
  }
  return {};
}

namespace {

PolicyWeights make_shape(int n, const std::vector<int>& hidden) {
  if (n <= 0) throw ConfigError("vehicle count must be positive");
  PolicyWeights w;
  w.num_vehicles = n;
  std::vector<int> widths{2 * n};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * n);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.cols = widths[i];
    l.rows = widths[i + 1];
    l.weights.assign(static_cast<std::size_t>(l.rows) * static_cast<std::size_t>(l.cols), 0.0);
    l.bias.assign(static_cast<std::size_t>(l.rows), 0.0);
    l.activation = i + 2 == widths.size() ? Activation::Sigmoid : Activation::Tanh;
    w.layers.push_back(std::move(l));
  }
  return w;
}

}  // namespace

PolicyWeights PolicyWeights::zeros(int n, const std::vector<int>& hidden) { return make_shape(n, hidden); }

PolicyWeights PolicyWeights::random(int n, std::uint64_t seed, const std::vector<int>& hidden) {
  PolicyWeights w = make_shape(n, hidden);
  Rng rng = make_rng(seed);
  for (auto& l : w.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& x : l.weights) x = u(rng);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Binary

namespace {

static_assert(sizeof(double) == 8);
constexpr char kMagic[4] = {'E', 'V', 'F', 'W'};
constexpr std::uint32_t kMaxDim = 1u << 20;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& out, double v) {
  auto bits = to_little(std::bit_cast<std::uint64_t>(v));
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}
void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw ConfigError("weight file is truncated");
}
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v;
  read_exact(in, &v, sizeof v);
  return to_little(v);
}
double get_f64(std::istream& in) {
  std::uint64_t bits;
  read_exact(in, &bits, sizeof bits);
  return std::bit_cast<double>(to_little(bits));
}
std::string get_str(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > 256) throw ConfigError("weight file string field too long");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}

}  // namespace

void write_weights_binary(std::ostream& out, const PolicyWeights& w) {
  if (auto problem = w.check(); !problem.empty()) throw ConfigError(problem);
  out.write(kMagic, 4);
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(w.num_vehicles));
  put_u32(out, static_cast<std::uint32_t>(w.layers.size()));
  for (int width : w.widths()) put_u32(out, static_cast<std::uint32_t>(width));
  for (const auto& l : w.layers) put_str(out, to_string(l.activation));
  put_str(out, w.observation_transform);
  for (const auto& l : w.layers) {
    for (double x : l.weights) put_f64(out, x);
    for (double x : l.bias) put_f64(out, x);
  }
}

PolicyWeights read_weights_binary(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("not a weight file (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kWeightsVersion) throw ConfigError("unsupported weight file version " + std::to_string(version));
  PolicyWeights w;
  const std::uint32_t vehicles = get_u32(in);
  const std::uint32_t count = get_u32(in);
  if (vehicles > kMaxDim || count == 0 || count > 64) throw ConfigError("weight file header out of range");
  w.num_vehicles = static_cast<int>(vehicles);
  std::vector<int> widths;
  for (std::uint32_t i = 0; i <= count; ++i) {
    const std::uint32_t width = get_u32(in);
    if (width == 0 || width > kMaxDim) throw ConfigError("weight file layer width out of range");
    widths.push_back(static_cast<int>(width));
  }
  w.layers.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    w.layers[i].cols = widths[i];
    w.layers[i].rows = widths[i + 1];
    w.layers[i].activation = parse_activation(get_str(in));
  }
  w.observation_transform = get_str(in);
  for (auto& l : w.layers) {
    l.weights.resize(static_cast<std::size_t>(l.rows) * static_cast<std::size_t>(l.cols));
    for (double& x : l.weights) x = get_f64(in);
    l.bias.resize(static_cast<std::size_t>(l.rows));
    for (double& x : l.bias) x = get_f64(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ConfigError("trailing bytes after weight data");
  if (auto problem = w.check(); !problem.empty()) throw ConfigError(problem);
  return w;
}

// ---------------------------------------------------------------------------
// Text

void write_weights_text(std::ostream& out, const PolicyWeights& w) {
  if (auto problem = w.check(); !problem.empty()) throw ConfigError(problem);
  out << "evfleet-weights " << kWeightsVersion << '\n';
  out << "vehicles " << w.num_vehicles << '\n';
  out << "widths";
  for (int width : w.widths()) out << ' ' << width;
  out << "\nactivations";
  for (const auto& l : w.layers) out << ' ' << to_string(l.activation);
  out << "\nobservation_transform " << w.observation_transform << '\n';
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& l = w.layers[i];
    out << "layer " << i << " weights\n";
    for (int r = 0; r < l.rows; ++r) {
      for (int c = 0; c < l.cols; ++c) {
        if (c) out << ' ';
        out << format_double(l.weights[static_cast<std::size_t>(r) * static_cast<std::size_t>(l.cols) +
                                        static_cast<std::size_t>(c)]);
      }
      out << '\n';
    }
    out << "layer " << i << " bias\n";
    for (int r = 0; r < l.rows; ++r) out << (r ? " " : "") << format_double(l.bias[static_cast<std::size_t>(r)]);
    out << '\n';
  }
}

namespace {

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(std::string("weight text ends before ") + what);
  return line;
}

std::istringstream keyword_line(std::istream& in, const std::string& keyword) {
  std::istringstream ls(next_line(in, keyword.c_str()));
  std::string word;
  ls >> word;
  if (word != keyword) throw ConfigError("weight text: expected '" + keyword + "', found '" + word + "'");
  return ls;
}

std::vector<double> number_line(std::istream& in, std::size_t count) {
  std::istringstream ls(next_line(in, "numbers"));
  std::vector<double> v;
  std::string tok;
  while (ls >> tok) {
    std::size_t used = 0;
    double x;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ConfigError("weight text: bad number '" + tok + "'");
    }
    if (used != tok.size()) throw ConfigError("weight text: bad number '" + tok + "'");
    v.push_back(x);
  }
  if (v.size() != count) {
    throw ConfigError("weight text: expected " + std::to_string(count) + " numbers, found " + std::to_string(v.size()));
  }
  return v;
}

}  // namespace

PolicyWeights read_weights_text(std::istream& in) {
  PolicyWeights w;
  std::uint32_t version = 0;
  if (!(keyword_line(in, "evfleet-weights") >> version) || version != kWeightsVersion) {
    throw ConfigError("unsupported weight text version");
  }
  if (!(keyword_line(in, "vehicles") >> w.num_vehicles)) throw ConfigError("weight text: bad vehicle count");
  std::vector<int> widths;
  {
    auto ls = keyword_line(in, "widths");
    int x;
    while (ls >> x) {
      if (x <= 0 || x > static_cast<int>(kMaxDim)) throw ConfigError("weight text: width out of range");
      widths.push_back(x);
    }
  }
  if (widths.size() < 2) throw ConfigError("weight text needs at least two widths");
  {
    auto ls = keyword_line(in, "activations");
    std::string name;
    while (ls >> name) {
      Layer l;
      l.activation = parse_activation(name);
      w.layers.push_back(l);
    }
  }
  if (w.layers.size() + 1 != widths.size()) throw ConfigError("weight text: activation count does not match layers");
  {
    auto ls = keyword_line(in, "observation_transform");
    ls >> w.observation_transform;
  }
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    auto& l = w.layers[i];
    l.cols = widths[i];
    l.rows = widths[i + 1];
    keyword_line(in, "layer");
    for (int r = 0; r < l.rows; ++r) {
      auto row = number_line(in, static_cast<std::size_t>(l.cols));
      l.weights.insert(l.weights.end(), row.begin(), row.end());
    }
    keyword_line(in, "layer");
    l.bias = number_line(in, static_cast<std::size_t>(l.rows));
  }
  if (auto problem = w.check(); !problem.empty()) throw ConfigError(problem);
  return w;
}

PolicyWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weight file " + path);
  char head[4] = {};
  in.read(head, 4);
  in.clear();
  in.seekg(0);
  try {
    if (std::memcmp(head, kMagic, 4) == 0) return read_weights_binary(in);
    return read_weights_text(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_weights(const std::string& path, const PolicyWeights& weights) {
  const bool text = path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write weight file " + path);
  if (text) {
    write_weights_text(out, weights);
  } else {
    write_weights_binary(out, weights);
  }
  if (!out) throw ConfigError("failed writing weight file " + path);
}

}  // namespace evfleet::policy
