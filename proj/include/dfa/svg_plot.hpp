#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dfa/experiment.hpp"

namespace dfa {

/// Per-step mean and 90% normal-approximation half-width over seeds.
struct CurveSummary {
    std::string algorithm;
    std::vector<long> steps;
    std::vector<double> mean;
    std::vector<double> half_width;  // 1.645 * sample std / sqrt(n_seeds)
};

/// Collapses one algorithm's RunRecords (one per seed) into a mean curve
/// with a confidence band. All records must share the env_steps grid.
inline CurveSummary summarize_runs(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("summarize_runs: no records");
    CurveSummary out;
    out.algorithm = records[0].algorithm;
    const std::size_t n_points = records[0].points.size();
    const double n = static_cast<double>(records.size());
    for (const auto& rec : records)
        if (rec.points.size() != n_points)
            throw std::runtime_error("summarize_runs: seed curves disagree on grid length");
    for (std::size_t i = 0; i < n_points; ++i) {
        const long step = records[0].points[i].first;
        double mean = 0.0;
        for (const auto& rec : records) {
            if (rec.points[i].first != step)
                throw std::runtime_error("summarize_runs: seed curves disagree on env_steps");
            mean += rec.points[i].second;
        }
        mean /= n;
        double var = 0.0;
        for (const auto& rec : records) {
            const double d = rec.points[i].second - mean;
            var += d * d;
        }
        const double sd = records.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        out.steps.push_back(step);
        out.mean.push_back(mean);
        out.half_width.push_back(1.645 * sd / std::sqrt(n));
    }
    return out;
}

namespace detail {

inline std::string fmt2(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

inline const char* curve_color(std::size_t i) {
    static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d", "#666666"};
    return palette[i % 8];
}

inline std::string tick_label(double v) {
    char buf[32];
    if (std::abs(v) >= 10000)
        std::snprintf(buf, sizeof buf, "%.3g", v);
    else
        std::snprintf(buf, sizeof buf, "%g", std::round(v * 100.0) / 100.0);
    return buf;
}

}  // namespace detail

/// Static, self-contained SVG line chart: per algorithm the mean over seeds
/// plus a shaded 90% confidence band; env steps on x, average return on y.
inline void plot_curves(const std::vector<std::string>& csv_paths,
                        const std::string& out_path) {
    if (csv_paths.empty()) throw std::invalid_argument("plot_curves: no csv files");
    std::vector<CurveSummary> curves;
    for (const auto& path : csv_paths) {
        auto records = read_run_csv(path);
        // group by algorithm (a file normally holds one)
        std::map<std::string, std::vector<RunRecord>> groups;
        std::vector<std::string> order;
        for (auto& r : records) {
            if (groups.find(r.algorithm) == groups.end()) order.push_back(r.algorithm);
            groups[r.algorithm].push_back(std::move(r));
        }
        for (const auto& name : order) curves.push_back(summarize_runs(groups[name]));
    }
    // all curves must share the step grid
    std::vector<std::string> offenders;
    for (std::size_t i = 1; i < curves.size(); ++i)
        if (curves[i].steps != curves[0].steps) offenders.push_back(curves[i].algorithm);
    if (!offenders.empty()) {
        std::string msg = "plot_curves: env_steps grids differ for:";
        for (const auto& o : offenders) msg += " " + o;
        throw std::runtime_error(msg);
    }

    const double width = 860, height = 520;
    const double ml = 80, mr = 190, mt = 30, mb = 60;
    const double pw = width - ml - mr, ph = height - mt - mb;
    double xmin = 0, xmax = 1, ymin = 1e300, ymax = -1e300;
    if (!curves[0].steps.empty()) {
        xmin = static_cast<double>(curves[0].steps.front());
        xmax = static_cast<double>(curves[0].steps.back());
    }
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.mean.size(); ++i) {
            ymin = std::min(ymin, c.mean[i] - c.half_width[i]);
            ymax = std::max(ymax, c.mean[i] + c.half_width[i]);
        }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (ymax - ymin < 1e-12) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    auto mx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto my = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("plot_curves: cannot open " + out_path);
    using detail::fmt2;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // grid and ticks
    out << "  <g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / n_ticks;
        const double fy = ymin + (ymax - ymin) * i / n_ticks;
        out << "    <line x1=\"" << fmt2(mx(fx)) << "\" y1=\"" << fmt2(mt) << "\" x2=\""
            << fmt2(mx(fx)) << "\" y2=\"" << fmt2(mt + ph) << "\"/>\n";
        out << "    <line x1=\"" << fmt2(ml) << "\" y1=\"" << fmt2(my(fy)) << "\" x2=\""
            << fmt2(ml + pw) << "\" y2=\"" << fmt2(my(fy)) << "\"/>\n";
    }
    out << "  </g>\n";
    out << "  <g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
    for (int i = 0; i <= n_ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / n_ticks;
        const double fy = ymin + (ymax - ymin) * i / n_ticks;
        out << "    <text x=\"" << fmt2(mx(fx)) << "\" y=\"" << fmt2(mt + ph + 18)
            << "\" text-anchor=\"middle\">" << detail::tick_label(fx) << "</text>\n";
        out << "    <text x=\"" << fmt2(ml - 8) << "\" y=\"" << fmt2(my(fy) + 4)
            << "\" text-anchor=\"end\">" << detail::tick_label(fy) << "</text>\n";
    }
    out << "    <text x=\"" << fmt2(ml + pw / 2) << "\" y=\"" << fmt2(height - 14)
        << "\" text-anchor=\"middle\">environment steps</text>\n";
    out << "    <text x=\"20\" y=\"" << fmt2(mt + ph / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << fmt2(mt + ph / 2)
        << ")\">average return</text>\n";
    out << "  </g>\n";

    // bands then lines, so every mean stays visible
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        if (c.steps.empty()) continue;
        out << "  <polygon fill=\"" << detail::curve_color(ci)
            << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < c.steps.size(); ++i)
            out << fmt2(mx(static_cast<double>(c.steps[i]))) << ","
                << fmt2(my(c.mean[i] + c.half_width[i])) << " ";
        for (std::size_t i = c.steps.size(); i-- > 0;)
            out << fmt2(mx(static_cast<double>(c.steps[i]))) << ","
                << fmt2(my(c.mean[i] - c.half_width[i])) << " ";
        out << "\"/>\n";
    }
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        if (c.steps.empty()) continue;
        out << "  <polyline fill=\"none\" stroke=\"" << detail::curve_color(ci)
            << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < c.steps.size(); ++i)
            out << fmt2(mx(static_cast<double>(c.steps[i]))) << "," << fmt2(my(c.mean[i])) << " ";
        out << "\"/>\n";
    }

    // legend
    out << "  <g font-family=\"sans-serif\" font-size=\"13\">\n";
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const double ly = mt + 14 + 20 * static_cast<double>(ci);
        out << "    <line x1=\"" << fmt2(ml + pw + 12) << "\" y1=\"" << fmt2(ly) << "\" x2=\""
            << fmt2(ml + pw + 36) << "\" y2=\"" << fmt2(ly) << "\" stroke=\""
            << detail::curve_color(ci) << "\" stroke-width=\"2.5\"/>\n";
        out << "    <text x=\"" << fmt2(ml + pw + 42) << "\" y=\"" << fmt2(ly + 4)
            << "\" fill=\"#333333\">" << curves[ci].algorithm << "</text>\n";
    }
    out << "  </g>\n";
    out << "</svg>\n";
}

}  // namespace dfa
