#pragma once

#include <string>
#include <vector>

// Minimal SVG line charts for run outputs.  Plots are conveniences, not
// contracts: callers degrade to CSV-only on failure.

namespace ca50::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// `attribution` lines (seed, preset, checksum) are embedded as an SVG
// comment so plots stay attributable like every other output file.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series,
                      const std::string& attribution = "");

}  // namespace ca50::plot
