#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lapsim/errors.hpp"

namespace lapsim {

// Closed-loop fidelity metrics over lateral-error traces d(s), plus the
// resampling needed to compare traces on a common grid. Pure functions,
// safe to call concurrently.

struct TraceSample {
    double s_m = 0.0;
    double d_m = 0.0;
};

// Lateral offset against arc length over one lap, monotone in s.
using LateralErrorTrace = std::vector<TraceSample>;

inline constexpr double kDefaultGridSpacingM = 0.5;

// Largest absolute lateral error over the trace, evaluated brute force.
inline double max_lateral_error(const LateralErrorTrace& trace) {
    if (trace.empty()) throw MetricError("max lateral error of an empty trace");
    double m = 0.0;
    for (const auto& p : trace) m = std::max(m, std::abs(p.d_m));
    return m;
}

// Arc-length weighted mean of |d|. Diagnostic only: a constant intentional
// offset dominates it, so no acceptance gate uses this metric.
inline double mean_lateral_error(const LateralErrorTrace& trace) {
    if (trace.size() < 2) throw MetricError("mean lateral error needs at least 2 samples");
    double area = 0.0;
    const double span = trace.back().s_m - trace.front().s_m;
    if (!(span > 0.0)) throw MetricError("mean lateral error needs a positive arc span");
    for (std::size_t i = 1; i < trace.size(); ++i)
        area += 0.5 * (std::abs(trace[i - 1].d_m) + std::abs(trace[i].d_m)) *
                (trace[i].s_m - trace[i - 1].s_m);
    return area / span;
}

// Linear interpolation of the trace onto a uniform grid over [0, s_max]
// (s_max defaults to the trace end). Grid points beyond either end clamp to
// the end values, but a hole wider than gap_limit_m, inside the trace or at
// either end, is treated as missing coverage and faults.
inline LateralErrorTrace resample(const LateralErrorTrace& trace, double spacing_m,
                                  std::optional<double> s_max_m = std::nullopt,
                                  double gap_limit_m = 25.0) {
    if (!(spacing_m > 0.0)) throw MetricError("grid spacing must be positive");
    if (trace.size() < 2) throw MetricError("resampling needs at least 2 samples");
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i].s_m < trace[i - 1].s_m)
            throw MetricError("trace arc length must be monotone");
        if (trace[i].s_m - trace[i - 1].s_m > gap_limit_m)
            throw MetricError("trace gap of " +
                              std::to_string(trace[i].s_m - trace[i - 1].s_m) +
                              " m exceeds the coverage limit");
    }
    const double s_end = s_max_m.value_or(trace.back().s_m);
    if (!(s_end > 0.0)) throw MetricError("grid must span a positive arc length");
    if (trace.front().s_m > gap_limit_m ||
        s_end - trace.back().s_m > gap_limit_m)
        throw MetricError("trace does not cover the requested arc span");

    const auto n = static_cast<std::size_t>(std::ceil(s_end / spacing_m - 1e-9));
    LateralErrorTrace out;
    out.reserve(n + 1);
    std::size_t seg = 1;
    for (std::size_t i = 0; i <= n; ++i) {
        const double s = std::min(static_cast<double>(i) * spacing_m, s_end);
        double d;
        if (s <= trace.front().s_m) {
            d = trace.front().d_m;
        } else if (s >= trace.back().s_m) {
            d = trace.back().d_m;
        } else {
            while (trace[seg].s_m <= s) ++seg;  // grid hits on nodes stay exact (t = 0)
            const auto& a = trace[seg - 1];
            const auto& b = trace[seg];
            const double t = (s - a.s_m) / (b.s_m - a.s_m);
            d = a.d_m + t * (b.d_m - a.d_m);
        }
        out.push_back({s, d});
    }
    return out;
}

// Reference-weighted squared disparity between two traces on a shared grid:
// the average over arc length of (d - d_ref)^2 * |d_ref|, via the trapezoid
// rule. The |d_ref| weight makes agreement where the reference is near zero
// count for nothing, so the metric is deliberately asymmetric in its
// arguments. Units m^3.
inline double disparity(const LateralErrorTrace& trace,
                        const LateralErrorTrace& reference) {
    if (trace.size() != reference.size() || trace.size() < 2)
        throw MetricError("disparity needs two traces on the same grid");
    for (std::size_t i = 0; i < trace.size(); ++i)
        if (std::abs(trace[i].s_m - reference[i].s_m) > 1e-9)
            throw MetricError("disparity grid mismatch at index " + std::to_string(i));
    const double span = trace.back().s_m - trace.front().s_m;
    if (!(span > 0.0)) throw MetricError("disparity needs a positive arc span");
    double area = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const auto f = [&](std::size_t j) {
            const double e = trace[j].d_m - reference[j].d_m;
            return e * e * std::abs(reference[j].d_m);
        };
        area += 0.5 * (f(i - 1) + f(i)) * (trace[i].s_m - trace[i - 1].s_m);
    }
    return area / span;
}

}  // namespace lapsim
