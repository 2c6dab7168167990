#pragma once

// Static SVG figures from an exported metrics directory: SoH median with
// IQR band, cumulative revenue, grid power over time and the power
// distribution.

#include <string>
#include <vector>

namespace evfleet::plot {

// Reads the CSV files written by metrics::export_bundle from metrics_dir and
// writes soh.svg, revenue.svg, power.svg and power_histogram.svg to out_dir.
// Returns the written paths. Throws std::runtime_error on unreadable input.
std::vector<std::string> render(const std::string& metrics_dir, const std::string& out_dir);

}  // namespace evfleet::plot
