#include "ca50/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ca50/errors.hpp"

namespace ca50::plot {

namespace {

constexpr int kWidth = 960;
constexpr int kHeight = 540;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 150;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!(hi > lo)) {
            lo -= 1.0;
            hi += 1.0;
        }
        const double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series,
                      const std::string& attribution) {
    Range xr, yr;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw ModelDomainError("write_line_chart: series size mismatch");
        }
        for (double v : s.x) xr.include(v);
        for (double v : s.y) yr.include(v);
    }
    if (!std::isfinite(xr.lo) || !std::isfinite(yr.lo)) {
        throw ModelDomainError("write_line_chart: no data");
    }
    xr.pad();
    yr.pad();

    const double px0 = kMarginLeft, px1 = kWidth - kMarginRight;
    const double py0 = kHeight - kMarginBottom, py1 = kMarginTop;
    auto sx = [&](double x) {
        return px0 + (x - xr.lo) / (xr.hi - xr.lo) * (px1 - px0);
    };
    auto sy = [&](double y) {
        return py0 + (y - yr.lo) / (yr.hi - yr.lo) * (py1 - py0);
    };

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plot: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\">\n";
    if (!attribution.empty()) {
        out << "<!--\n" << attribution << "-->\n";
    }
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title
        << "</text>\n";

    // axes with 6 ticks each
    out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1
        << "\" y2=\"" << py0 << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0
        << "\" y2=\"" << py1 << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0;
        const double yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
        out << "<line x1=\"" << sx(xv) << "\" y1=\"" << py0 << "\" x2=\""
            << sx(xv) << "\" y2=\"" << py0 + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << sx(xv) << "\" y=\"" << py0 + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"11\">" << fmt(xv) << "</text>\n";
        out << "<line x1=\"" << px0 - 5 << "\" y1=\"" << sy(yv) << "\" x2=\""
            << px0 << "\" y2=\"" << sy(yv) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px0 - 8 << "\" y=\"" << sy(yv) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
            << "font-size=\"11\">" << fmt(yv) << "</text>\n";
    }
    out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\">" << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << (py0 + py1) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\" transform=\"rotate(-90 18 " << (py0 + py1) / 2
        << ")\">" << y_label << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.3\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << fmt(sx(s.x[i])) << "," << fmt(sy(s.y[i])) << " ";
        }
        out << "\"/>\n";
        const double ly = kMarginTop + 16.0 * static_cast<double>(k);
        out << "<line x1=\"" << px1 + 10 << "\" y1=\"" << ly << "\" x2=\""
            << px1 + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << px1 + 35 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out.good()) throw ConfigError("failed writing plot: " + path);
}

}  // namespace ca50::plot
