#pragma once

#include <string>
#include <vector>

namespace mecsim {

// One polyline on a chart. Points with a non-finite coordinate are skipped
// (the line breaks there rather than inventing a value).
struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained static SVG line chart: axes, tick grid, markers, legend.
// Output is deterministic for identical input. Intended for quick visual
// inspection of sweep results, not for publication typesetting.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width = 720, int height = 480);

}  // namespace mecsim
