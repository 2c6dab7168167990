#include "evfleet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "evfleet/util.hpp"

namespace evfleet::metrics {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5), quantile_sorted(values, 0.75), false};
}

MetricsBundle::MetricsBundle(double histogram_bin_kw) : bin_kw_(histogram_bin_kw) {
  if (!(bin_kw_ > 0.0)) throw std::invalid_argument("histogram bin width must be positive");
}

void MetricsBundle::record(const sim::Snapshot& after, const sim::TickReport& report) {
  const auto expected = static_cast<Tick>(power_.size());
  if (report.tick != expected) {
    throw std::logic_error("metrics: tick " + std::to_string(report.tick) + " recorded, expected " +
                           std::to_string(expected));
  }
  std::vector<double> soh;
  for (const auto& v : after.vehicles) {
    if (!v.retired) soh.push_back(v.soh());
  }
  soh_.push_back({report.tick, soh.size(), quartiles(std::move(soh))});

  for (const auto& e : report.events) {
    switch (e.kind) {
      case sim::EventKind::JobReleased: ++jobs_.released; break;
      case sim::EventKind::JobCompleted:
        ++jobs_.completed;
        cumulative_revenue_ += e.value;
        break;
      case sim::EventKind::JobRejected: ++jobs_.rejected; break;
      case sim::EventKind::JobFailed: ++jobs_.failed; break;
      case sim::EventKind::RetirementCrossed:
        retirements_.push_back({e.vehicle, e.tick, e.value, false});
        break;
      case sim::EventKind::VehicleRetired:
        retirements_.push_back({e.vehicle, e.tick, e.value, true});
        break;
      default: break;
    }
  }
  revenue_.push_back(cumulative_revenue_);
  power_.push_back(report.grid_power_kw);
  ++histogram_[static_cast<std::int64_t>(std::floor(report.grid_power_kw / bin_kw_))];
  grid_energy_kwh_ += report.grid_energy_kwh;
  for (double loss : report.capacity_loss_kwh) capacity_loss_kwh_ += loss;
  if (!report.schedule_accepted) ++rejected_schedules_;
}

nlohmann::ordered_json summary(const MetricsBundle& b, const RunInfo& info) {
  nlohmann::ordered_json j;
  j["config_hash"] = info.config_hash;
  j["dataset_hash"] = info.dataset_hash;
  j["traffic_hash"] = info.traffic_hash;
  j["seed"] = info.seed;
  j["seed_overridden"] = info.seed_overridden;
  j["policy"] = info.policy;
  j["mode"] = info.mode;
  j["fleet_size"] = info.fleet_size;
  j["ticks"] = b.ticks();
  j["jobs"] = {{"released", b.jobs().released},
               {"completed", b.jobs().completed},
               {"rejected", b.jobs().rejected},
               {"failed", b.jobs().failed}};
  j["revenue"] = format_double(b.total_revenue());
  j["grid_energy_kwh"] = format_double(b.grid_energy_kwh());
  j["capacity_loss_kwh"] = format_double(b.capacity_loss_kwh());
  j["rejected_schedules"] = b.rejected_schedules();
  j["retirements"] = b.retirement_log().size();
  if (!b.soh_series().empty() && !b.soh_series().back().soh.empty) {
    const auto& q = b.soh_series().back().soh;
    j["final_soh"] = {{"q25", format_double(q.q25)}, {"median", format_double(q.median)}, {"q75", format_double(q.q75)}};
  } else {
    j["final_soh"] = nullptr;
  }
  return j;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void export_bundle(const MetricsBundle& b, const RunInfo& info, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  const fs::path root(dir);

  {
    const auto path = root / "soh.csv";
    auto out = open_out(path);
    out << "tick,active,q25,median,q75\n";
    for (const auto& r : b.soh_series()) {
      out << r.tick << ',' << r.active << ',';
      if (r.soh.empty) {
        out << ",,\n";
      } else {
        out << format_double(r.soh.q25) << ',' << format_double(r.soh.median) << ',' << format_double(r.soh.q75)
            << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = root / "revenue.csv";
    auto out = open_out(path);
    out << "tick,cumulative_revenue\n";
    for (std::size_t t = 0; t < b.revenue_series().size(); ++t) {
      out << t << ',' << format_double(b.revenue_series()[t]) << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = root / "power.csv";
    auto out = open_out(path);
    out << "tick,grid_power_kw\n";
    for (std::size_t t = 0; t < b.power_series().size(); ++t) {
      out << t << ',' << format_double(b.power_series()[t]) << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = root / "power_histogram.csv";
    auto out = open_out(path);
    out << "bin_lower_kw,bin_upper_kw,ticks\n";
    if (!b.power_histogram().empty()) {
      const std::int64_t last = b.power_histogram().rbegin()->first;
      for (std::int64_t k = std::min<std::int64_t>(0, b.power_histogram().begin()->first); k <= last; ++k) {
        auto it = b.power_histogram().find(k);
        out << format_double(static_cast<double>(k) * b.histogram_bin_kw()) << ','
            << format_double(static_cast<double>(k + 1) * b.histogram_bin_kw()) << ','
            << (it == b.power_histogram().end() ? 0 : it->second) << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = root / "retirements.csv";
    auto out = open_out(path);
    out << "vehicle,tick,soh,event\n";
    for (const auto& r : b.retirement_log()) {
      out << r.vehicle << ',' << r.tick << ',' << format_double(r.soh) << ',' << (r.removed ? "retired" : "crossed")
          << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = root / "summary.json";
    auto out = open_out(path);
    out << summary(b, info).dump(2) << '\n';
    finish(out, path);
  }
}

}  // namespace evfleet::metrics
