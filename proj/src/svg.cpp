#include "cellalign/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cellalign/errors.hpp"

namespace cellalign {

namespace {

constexpr double kSize = 400.0;
constexpr double kMargin = 40.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string scatter_svg(std::span<const double> x, std::span<const double> y,
                        const std::string& title) {
    if (x.size() != y.size() || x.empty()) throw InvalidInput("scatter_svg input mismatch");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lo = std::min({lo, x[i], y[i]});
        hi = std::max({hi, x[i], y[i]});
    }
    if (hi <= lo) hi = lo + 1.0;
    const double span = hi - lo;
    auto px = [&](double v) { return kMargin + (v - lo) / span * kSize; };
    auto py = [&](double v) { return kMargin + kSize - (v - lo) / span * kSize; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kMargin
      << "\" height=\"" << kSize + 2 * kMargin << "\">\n";
    s << "<text x=\"" << kMargin << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    s << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" fill=\"none\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << num(px(lo)) << "\" y1=\"" << num(py(lo)) << "\" x2=\""
      << num(px(hi)) << "\" y2=\"" << num(py(hi))
      << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        s << "<circle cx=\"" << num(px(x[i])) << "\" cy=\"" << num(py(y[i]))
          << "\" r=\"2\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string heatmap_svg(const ConcordanceGrid& grid, const std::string& title) {
    if (grid.similarity.empty()) throw EmptyInput("heatmap_svg on empty grid");
    long rmin = std::numeric_limits<long>::max(), rmax = std::numeric_limits<long>::min();
    long cmin = rmin, cmax = rmax;
    for (const auto& [bin, v] : grid.similarity) {
        rmin = std::min(rmin, bin.first);
        rmax = std::max(rmax, bin.first);
        cmin = std::min(cmin, bin.second);
        cmax = std::max(cmax, bin.second);
    }
    const double cell = kSize / static_cast<double>(std::max(rmax - rmin, cmax - cmin) + 1);

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kMargin
      << "\" height=\"" << kSize + 2 * kMargin << "\">\n";
    s << "<text x=\"" << kMargin << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    for (const auto& [bin, v] : grid.similarity) {
        // warm (red) = concordant, cold (blue) = discordant
        const int red = static_cast<int>(std::lround(255.0 * v));
        const int blue = 255 - red;
        s << "<rect x=\"" << num(kMargin + (bin.first - rmin) * cell) << "\" y=\""
          << num(kMargin + (bin.second - cmin) * cell) << "\" width=\"" << num(cell)
          << "\" height=\"" << num(cell) << "\" fill=\"rgb(" << red << ",64," << blue
          << ")\"/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace cellalign
