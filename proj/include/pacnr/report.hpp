#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "errors.hpp"
#include "textio.hpp"

namespace pacnr {

inline constexpr int kAuditCsvVersion = 1;

inline const std::vector<std::string>& audit_columns() {
    static const std::vector<std::string> cols = {
        "depth",          "width",         "m",               "gamma_class",     "delta",           "B_layer_l2",
        "B_preact",       "B_preact_5pc",  "B_preact_median", "B_output",        "B_jac_row_l2",    "B_jac_spec",
        "sigma_star",     "binding_constraint", "kl",         "train_margin_loss", "test_error",    "our_bound",
        "our_bound_5pc",  "our_bound_median", "our_bound_loose", "neyshabur18",  "bartlett17",      "spectral_term",
        "warnings"};
    return cols;
}

struct CsvOptions {
    bool figure_mode = false;
    bool loose = false;
};

inline std::vector<std::string> audit_header(const CsvOptions& opt) {
    std::vector<std::string> h = audit_columns();
    if (opt.loose) {
        h.push_back("sigma_star_loose");
        h.push_back("B_jac_row_l2_loose");
    }
    if (opt.figure_mode) {
        for (const char* c : {"fig_our_bound", "fig_our_bound_5pc", "fig_our_bound_median", "fig_our_bound_loose",
                              "fig_neyshabur18", "fig_bartlett17", "fig_spectral_term"})
            h.push_back(c);
    }
    return h;
}

inline std::string num(double v) { return format_double(v, 12); }

inline std::string join(const std::vector<std::string>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : std::string()) + v[i];
    return s;
}

inline std::vector<std::string> audit_row(const BoundReport& r, const CsvOptions& opt) {
    const BTerms& b = r.b;
    std::vector<std::string> row = {
        std::to_string(r.depth),
        std::to_string(r.width),
        std::to_string(r.m),
        num(r.gamma_class),
        num(r.delta),
        num(b.layer_l2),
        num(b.preact),
        num(b.preact_5pc),
        num(b.preact_median),
        num(b.output),
        num(b.jac_row_l2),
        num(b.jac_spec),
        num(r.sigma.sigma),
        r.sigma.binding,
        num(r.kl),
        num(r.train_margin_loss),
        std::isnan(r.test_error) ? std::string() : num(r.test_error),
        num(r.final_bound),
        num(r.final_bound_5pc),
        num(r.final_bound_median),
        num(r.final_bound_loose),
        num(r.baselines.neyshabur18),
        num(r.baselines.bartlett17),
        num(r.baselines.spectral_term),
        join(r.warnings, ';'),
    };
    if (opt.loose) {
        row.push_back(num(r.sigma_loose.sigma));
        row.push_back(num(b.jac_row_l2_loose));
    }
    if (opt.figure_mode) {
        const double base = std::max({b.layer_l2, b.output, b.jac_row_l2, b.jac_spec});
        row.push_back(num(r.figure_value(std::max(base, b.preact))));
        row.push_back(num(r.figure_value(std::max(base, b.preact_5pc))));
        row.push_back(num(r.figure_value(std::max(base, b.preact_median))));
        row.push_back(num(r.figure_value(std::max({b.layer_l2, b.output, b.preact, b.jac_row_l2_loose}), true)));
        row.push_back(num(r.baselines.neyshabur18));
        row.push_back(num(r.baselines.bartlett17));
        row.push_back(num(r.baselines.spectral_term));
    }
    return row;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error("unknown column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvTable read_csv(std::istream& in, const std::string& path = "<csv>") {
    CsvTable t;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t start = offset;
        offset += line.size() + 1;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(path, start, "row has " + std::to_string(fields.size()) + " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw ParseError(path, 0, "empty CSV");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open");
    return read_csv(in, path);
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& row) { out << join(row, ',') << "\n"; }

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope·x.
inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit f;
    f.points = x.size();
    if (x.size() < 2) return f;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    return f;
}

/// (x, log10 y) pairs of a column, skipping empty, non-positive or non-finite entries.
inline std::pair<std::vector<double>, std::vector<double>> log_points(const CsvTable& t, const std::string& xcol,
                                                                      const std::string& ycol) {
    const std::size_t xi = t.column(xcol), yi = t.column(ycol);
    std::vector<double> xs, ys;
    for (const auto& row : t.rows) {
        double x, y;
        if (!parse_double(row[xi], x) || !parse_double(row[yi], y)) continue;
        if (!(y > 0.0) || !std::isfinite(y) || !std::isfinite(x)) continue;
        xs.push_back(x);
        ys.push_back(std::log10(y));
    }
    return {xs, ys};
}

inline LinearFit log10_slope(const CsvTable& t, const std::string& xcol, const std::string& ycol) {
    auto [xs, ys] = log_points(t, xcol, ycol);
    return least_squares(xs, ys);
}

/// Pixel mapping of a log-scale plot.
struct PlotFrame {
    double width = 720, height = 440, left = 70, right = 20, top = 30, bottom = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;  // y in log10 units

    double x_pixel(double x) const {
        const double span = xmax > xmin ? xmax - xmin : 1.0;
        return left + (x - xmin) / span * (width - left - right);
    }
    double y_pixel(double logy) const {
        const double span = ymax > ymin ? ymax - ymin : 1.0;
        return height - bottom - (logy - ymin) / span * (height - top - bottom);
    }
};

inline PlotFrame plot_frame(const CsvTable& t, const std::string& xcol, const std::vector<std::string>& cols) {
    PlotFrame f;
    bool first = true;
    for (const auto& c : cols) {
        auto [xs, ys] = log_points(t, xcol, c);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (first) {
                f.xmin = f.xmax = xs[i];
                f.ymin = f.ymax = ys[i];
                first = false;
            }
            f.xmin = std::min(f.xmin, xs[i]);
            f.xmax = std::max(f.xmax, xs[i]);
            f.ymin = std::min(f.ymin, ys[i]);
            f.ymax = std::max(f.ymax, ys[i]);
        }
    }
    f.ymin = std::floor(f.ymin);
    f.ymax = std::max(std::ceil(f.ymax), f.ymin + 1.0);
    return f;
}

/// log10(column) against `xcol`: one polyline per column through the per-x mean, points for every row,
/// and the least-squares slope in the legend.
inline std::string render_svg(const CsvTable& t, const std::string& xcol, const std::vector<std::string>& cols) {
    for (const auto& c : cols) t.column(c);
    t.column(xcol);
    const PlotFrame f = plot_frame(t, xcol, cols);
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double x0 = f.left, x1 = f.width - f.right, y0 = f.top, y1 = f.height - f.bottom;
    o << "<line x1=\"" << x0 << "\" y1=\"" << y1 << "\" x2=\"" << x1 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
    for (double ly = f.ymin; ly <= f.ymax + 1e-9; ly += 1.0) {
        o << "<text x=\"" << x0 - 8 << "\" y=\"" << f.y_pixel(ly) + 4 << "\" text-anchor=\"end\">1e" << ly << "</text>\n";
        o << "<line x1=\"" << x0 << "\" y1=\"" << f.y_pixel(ly) << "\" x2=\"" << x1 << "\" y2=\"" << f.y_pixel(ly)
          << "\" stroke=\"#ddd\"/>\n";
    }
    std::vector<double> ticks;
    for (const auto& row : t.rows) {
        double x;
        if (parse_double(row[t.column(xcol)], x) && std::find(ticks.begin(), ticks.end(), x) == ticks.end()) ticks.push_back(x);
    }
    for (double x : ticks)
        o << "<text x=\"" << f.x_pixel(x) << "\" y=\"" << y1 + 18 << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
    o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << f.height - 12 << "\" text-anchor=\"middle\">" << xcol << "</text>\n";

    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
        const char* color = palette[ci % 8];
        auto [xs, ys] = log_points(t, xcol, cols[ci]);
        std::map<double, std::pair<double, int>> mean;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mean[xs[i]].first += ys[i];
            mean[xs[i]].second += 1;
        }
        o << "<polyline data-column=\"" << cols[ci] << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& [x, s] : mean) {
            o << (first ? "" : " ") << f.x_pixel(x) << "," << f.y_pixel(s.first / s.second);
            first = false;
        }
        o << "\"/>\n";
        for (std::size_t i = 0; i < xs.size(); ++i)
            o << "<circle cx=\"" << f.x_pixel(xs[i]) << "\" cy=\"" << f.y_pixel(ys[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const LinearFit fit = least_squares(xs, ys);
        o << "<text data-slope=\"" << format_double(fit.slope) << "\" x=\"" << x0 + 10 << "\" y=\"" << y0 + 14 * (ci + 1)
          << "\" fill=\"" << color << "\">" << cols[ci] << ": slope " << num(fit.slope) << " (x" << num(std::pow(10.0, fit.slope))
          << " per unit)</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace pacnr
