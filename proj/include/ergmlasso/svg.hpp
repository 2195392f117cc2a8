#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "ergmlasso/selector.hpp"
#include "ergmlasso/textio.hpp"

namespace ergmlasso {

// Static coefficient-path plot: one path element per term, penalization
// decreasing left to right, dashed zero line, legend at the right margin.
// No timestamps or external references, so output is reproducible.
inline void write_path_svg(std::ostream& out, const PathResult& path) {
    static const char* palette[] = {"#1b6ca8", "#d1495b", "#66a182", "#edae49",
                                    "#8d96a3", "#7d5ba6", "#00798c", "#c18c5d"};
    const int n_colors = 8;
    const double width = 960, height = 560;
    const double left = 70, right = 220, top = 30, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    const size_t G = path.grid.values.size();
    const size_t p1 = path.labels.size();
    double lo = 0.0, hi = 0.0;
    for (auto& row : path.coef)
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto x_of = [&](size_t g) {
        return left + (G > 1 ? plot_w * g / (G - 1) : 0.5 * plot_w);
    };
    auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
        << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";

    // frame and zero line
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << format_double(y_of(0.0))
        << "\" x2=\"" << left + plot_w << "\" y2=\"" << format_double(y_of(0.0))
        << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

    // x ticks: a few lambda values along the grid
    const size_t n_ticks = std::min<size_t>(6, G);
    for (size_t t = 0; t < n_ticks; ++t) {
        const size_t g = n_ticks > 1 ? t * (G - 1) / (n_ticks - 1) : 0;
        out << "<text x=\"" << format_double(x_of(g)) << "\" y=\""
            << height - bottom + 20
            << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">"
            << format_double(path.grid.values[g]) << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15
        << "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">"
           "penalization (decreasing)</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4;
        out << "<text x=\"" << left - 8 << "\" y=\"" << format_double(y_of(v) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">"
            << format_double(v) << "</text>\n";
    }

    for (size_t j = 0; j < p1; ++j) {
        const char* color = palette[j % n_colors];
        std::string d;
        for (size_t g = 0; g < G; ++g) {
            d += (g == 0 ? "M" : " L");
            d += format_double(x_of(g)) + " " + format_double(y_of(path.coef[g][j]));
        }
        out << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.6\"/>\n";
        const double ly = top + 18.0 * (j + 1);
        out << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\""
            << left + plot_w + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"1.6\"/>\n";
        out << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << ly + 4
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << path.labels[j]
            << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace ergmlasso
