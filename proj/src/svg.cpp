#include "mecsim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mecsim {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    bool empty() const { return lo > hi; }
    void widen() {
        if (empty()) {
            lo = 0.0;
            hi = 1.0;
        } else if (lo == hi) {
            lo -= 1.0;
            hi += 1.0;
        } else {
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
    }
};

std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    const double span = hi - lo;
    const double raw = span / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    const double step = mag * (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0);
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step)
        ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
    return ticks;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width, int height) {
    const double left = 72, right = 24, top = 44, bottom = 56;
    const double pw = width - left - right;
    const double ph = height - top - bottom;

    Range rx, ry;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                rx.add(s.x[i]);
                ry.add(s.y[i]);
            }
    const bool no_data = rx.empty();
    rx.widen();
    ry.widen();

    const auto px = [&](double v) { return left + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
    const auto py = [&](double v) { return top + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
           "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " +
           fmt(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(width / 2.0) +
           "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">" +
           escape(title) + "</text>\n";

    for (double t : nice_ticks(rx.lo, rx.hi)) {
        svg += "<line x1=\"" + fmt(px(t)) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(px(t)) +
               "\" y2=\"" + fmt(top + ph) + "\" stroke=\"#e0e0e0\"/>\n";
        svg += "<text x=\"" + fmt(px(t)) + "\" y=\"" + fmt(top + ph + 18) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" + fmt(t) +
               "</text>\n";
    }
    for (double t : nice_ticks(ry.lo, ry.hi)) {
        svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(py(t)) + "\" x2=\"" +
               fmt(left + pw) + "\" y2=\"" + fmt(py(t)) + "\" stroke=\"#e0e0e0\"/>\n";
        svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(t) + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + fmt(t) +
               "</text>\n";
    }
    svg += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) +
           "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"#404040\"/>\n";
    svg += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(height - 14) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" +
           escape(x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + fmt(top + ph / 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           fmt(top + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

    if (no_data)
        svg += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(top + ph / 2) +
               "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" fill=\"#808080\">no data</text>\n";

    const int ncolors = static_cast<int>(sizeof(kPalette) / sizeof(kPalette[0]));
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % ncolors];
        std::string points;
        std::string markers;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                if (!points.empty()) {
                    svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
                           color + "\" stroke-width=\"1.8\"/>\n";
                    points.clear();
                }
                continue;
            }
            if (!points.empty()) points += " ";
            points += fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
            markers += "<circle cx=\"" + fmt(px(s.x[i])) + "\" cy=\"" + fmt(py(s.y[i])) +
                       "\" r=\"2.6\" fill=\"" + color + "\"/>\n";
        }
        if (!points.empty())
            svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.8\"/>\n";
        svg += markers;

        const double ly = top + 16 + 16.0 * si;
        svg += "<line x1=\"" + fmt(left + pw - 150) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
               fmt(left + pw - 128) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
               "\" stroke-width=\"1.8\"/>\n";
        svg += "<text x=\"" + fmt(left + pw - 122) + "\" y=\"" + fmt(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + escape(s.label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace mecsim
