#pragma once

// Deterministic SVG line charts of one estimator of a report, with its
// confidence band drawn as a shaded polygon.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "levysync/errors.hpp"
#include "levysync/mc.hpp"

namespace levysync {

enum class AxisScale { Linear, SemiLogY, LogLog };

namespace detail {

struct Axis {
    double lo, hi;
    bool log;

    double map(double v, double a, double b) const {
        const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) : (v - lo) / (hi - lo);
        return a + t * (b - a);
    }
};

inline Axis make_axis(std::vector<double> values, bool log) {
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (log) {
        lo = std::pow(10.0, std::floor(std::log10(lo)));
        hi = std::pow(10.0, std::ceil(std::log10(hi)));
        if (hi <= lo) hi = lo * 10.0;
    } else {
        if (hi == lo) {
            const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
            lo -= pad;
            hi += pad;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    return {lo, hi, log};
}

inline std::vector<double> ticks(const Axis& a) {
    std::vector<double> out;
    if (a.log) {
        for (double v = a.lo; v <= a.hi * 1.0000001; v *= 10.0) out.push_back(v);
    } else {
        for (int i = 0; i <= 4; ++i) out.push_back(a.lo + (a.hi - a.lo) * i / 4.0);
    }
    return out;
}

inline std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

/// Chart of `estimator` against the sweep value. Points that cannot be shown
/// on a log axis (non-positive) are dropped; a single point is drawn as a
/// marker without a line. Raises DomainError when nothing is left to draw.
inline std::string emit_plot(const ExperimentReport& report, const std::string& estimator,
                             AxisScale scale = AxisScale::LogLog) {
    if (report.rows.empty()) throw DomainError("emit_plot: empty report");
    const bool log_x = scale == AxisScale::LogLog;
    const bool log_y = scale != AxisScale::Linear;
    std::vector<ReportRow> rows;
    for (const auto& r : report.series(estimator)) {
        if (!std::isfinite(r.value) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) continue;
        if (log_x && !(r.sweep_value > 0.0)) continue;
        if (log_y && !(r.value > 0.0)) continue;
        rows.push_back(r);
    }
    if (rows.empty()) throw DomainError("emit_plot: no plottable rows for estimator '" + estimator + "'");
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.sweep_value < b.sweep_value; });

    // Band ends that fall off a log axis are clamped to the lowest value shown.
    double min_pos = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) min_pos = std::min(min_pos, r.value);
    auto band_lo = [&](const ReportRow& r) { return log_y ? std::max(r.lo, min_pos * 0.5) : r.lo; };

    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        xs.push_back(r.sweep_value);
        ys.push_back(r.value);
        ys.push_back(band_lo(r));
        ys.push_back(r.hi);
    }
    const auto ax = detail::make_axis(xs, log_x);
    const auto ay = detail::make_axis(ys, log_y);
    constexpr double W = 640, H = 420, L = 80, R = 20, T = 40, B = 60;
    auto px = [&](double v) { return detail::fmt("%.2f", ax.map(v, L, W - R)); };
    auto py = [&](double v) { return detail::fmt("%.2f", ay.map(v, H - B, T)); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
    s += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         detail::escape_xml(report.manifest.experiment + ": " + estimator) + "</text>\n";
    s += "<g stroke=\"black\" fill=\"none\"><line x1=\"80\" y1=\"360\" x2=\"620\" y2=\"360\"/>"
         "<line x1=\"80\" y1=\"40\" x2=\"80\" y2=\"360\"/></g>\n";
    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (double t : detail::ticks(ax))
        s += "<line x1=\"" + px(t) + "\" y1=\"360\" x2=\"" + px(t) + "\" y2=\"365\" stroke=\"black\"/><text x=\"" + px(t) +
             "\" y=\"378\" text-anchor=\"middle\">" + detail::fmt("%.3g", t) + "</text>\n";
    for (double t : detail::ticks(ay))
        s += "<line x1=\"75\" y1=\"" + py(t) + "\" x2=\"80\" y2=\"" + py(t) + "\" stroke=\"black\"/><text x=\"72\" y=\"" +
             py(t) + "\" text-anchor=\"end\" dominant-baseline=\"middle\">" + detail::fmt("%.3g", t) + "</text>\n";
    s += "</g>\n";
    s += "<text x=\"350\" y=\"405\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">sweep value</text>\n";

    if (rows.size() > 1) {
        std::string band;
        for (const auto& r : rows) band += px(r.sweep_value) + "," + py(r.hi) + " ";
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) band += px(it->sweep_value) + "," + py(band_lo(*it)) + " ";
        band.pop_back();
        s += "<polygon points=\"" + band + "\" fill=\"#4477aa\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        std::string line;
        for (const auto& r : rows) line += px(r.sweep_value) + "," + py(r.value) + " ";
        line.pop_back();
        s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#4477aa\" stroke-width=\"2\"/>\n";
    } else {
        const auto& r = rows.front();
        const double top = ay.map(r.hi, H - B, T), bottom = ay.map(band_lo(r), H - B, T);
        s += "<rect x=\"" + detail::fmt("%.2f", ax.map(r.sweep_value, L, W - R) - 3.0) + "\" y=\"" + detail::fmt("%.2f", top) +
             "\" width=\"6\" height=\"" + detail::fmt("%.2f", bottom - top) + "\" fill=\"#4477aa\" fill-opacity=\"0.2\"/>\n";
    }
    for (const auto& r : rows)
        s += "<circle cx=\"" + px(r.sweep_value) + "\" cy=\"" + py(r.value) + "\" r=\"3.5\" fill=\"#4477aa\"/>\n";
    s += "</svg>\n";
    return s;
}

}  // namespace levysync
