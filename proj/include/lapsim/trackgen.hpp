#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lapsim/errors.hpp"
#include "lapsim/loop.hpp"
#include "lapsim/track.hpp"
#include "lapsim/vehicle.hpp"

namespace lapsim {

// Synthetic track and reference-lap generation. Both generators are pure
// functions of their inputs; no randomness is involved.

struct GeneratorSpec {
    enum class Kind { oval, road_course };
    Kind kind = Kind::oval;

    // Oval: two straights joined by two 180 degree arcs, one banking level
    // per arc (ramped in and out inside the arc).
    double straight_m = 400.0;
    double radius_m = 200.0;
    std::array<double, 2> arc_bank_rad{0.0, 0.0};

    // Road course: a fixed six-corner layout (five left, one right) scaled
    // uniformly.
    double road_scale = 1.0;

    double sample_spacing_m = 2.0;
    double corridor_half_width_m = TrackCenterline::kDefaultCorridorHalfWidthM;

    void validate() const {
        if (!(radius_m > 0.0)) throw GenerationError("arc radius must be positive");
        if (!(straight_m >= 0.0)) throw GenerationError("straight length must be non-negative");
        if (!(road_scale > 0.0)) throw GenerationError("road course scale must be positive");
        if (!(sample_spacing_m > 0.0) || sample_spacing_m > TrackCenterline::kMaxSpacingM)
            throw GenerationError("sample spacing must be in (0, 2] m");
        for (double b : arc_bank_rad)
            if (!(std::abs(b) < 0.5 * M_PI))
                throw GenerationError("banking must stay below vertical");
        if (!(corridor_half_width_m > 0.0))
            throw GenerationError("corridor half width must be positive");
    }
};

namespace trackgen_detail {

struct Segment {
    double length_m = 0.0;
    double kappa_radpm = 0.0;  // 0 = straight, signed arc curvature otherwise
    double bank_rad = 0.0;     // level inside the segment, ramped at the ends
};

// Samples a piecewise straight/arc path. Each segment contributes samples on
// [start, end); closure appends an exact copy of the start pose so closed
// tracks seam within machine precision.
inline std::vector<TrackSample> sample_path(const std::vector<Segment>& segments,
                                            double spacing_m) {
    std::vector<TrackSample> rows;
    double x = 0.0, y = 0.0, psi = 0.0, s = 0.0;
    for (const Segment& seg : segments) {
        const auto n = static_cast<std::size_t>(std::ceil(seg.length_m / spacing_m));
        const double ds = seg.length_m / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = static_cast<double>(i) * ds;
            TrackSample ts;
            ts.s_m = s + u;
            if (seg.kappa_radpm == 0.0) {
                ts.x_m = x + u * std::cos(psi);
                ts.y_m = y + u * std::sin(psi);
                ts.psi_rad = psi;
            } else {
                const double k = seg.kappa_radpm;
                ts.x_m = x + (std::sin(psi + k * u) - std::sin(psi)) / k;
                ts.y_m = y - (std::cos(psi + k * u) - std::cos(psi)) / k;
                ts.psi_rad = psi + k * u;
            }
            ts.kappa_radpm = seg.kappa_radpm;
            // Banking ramps over the outer 15% of the segment so the lateral
            // support never steps across a sample interval.
            const double frac = u / seg.length_m;
            const double ramp = std::min({1.0, frac / 0.15, (1.0 - frac) / 0.15});
            ts.bank_rad = seg.bank_rad * std::max(ramp, 0.0);
            rows.push_back(ts);
        }
        if (seg.kappa_radpm == 0.0) {
            x += seg.length_m * std::cos(psi);
            y += seg.length_m * std::sin(psi);
        } else {
            const double k = seg.kappa_radpm;
            const double psi1 = psi + k * seg.length_m;
            x += (std::sin(psi1) - std::sin(psi)) / k;
            y -= (std::cos(psi1) - std::cos(psi)) / k;
            psi = psi1;
        }
        s += seg.length_m;
    }
    TrackSample seam = rows.front();
    seam.s_m = s;
    seam.psi_rad = psi;  // cumulative heading; wraps onto the start heading
    rows.push_back(seam);
    return rows;
}

}  // namespace trackgen_detail

inline TrackCenterline generate_track(const GeneratorSpec& spec) {
    spec.validate();
    using trackgen_detail::Segment;
    std::vector<Segment> segments;
    const double half_turn = M_PI;
    if (spec.kind == GeneratorSpec::Kind::oval) {
        const double arc = half_turn * spec.radius_m;
        segments = {
            {spec.straight_m, 0.0, 0.0},
            {arc, 1.0 / spec.radius_m, spec.arc_bank_rad[0]},
            {spec.straight_m, 0.0, 0.0},
            {arc, 1.0 / spec.radius_m, spec.arc_bank_rad[1]},
        };
    } else {
        // Six corners, net +360 degrees: five lefts and one right-hand kink.
        const double c = spec.road_scale;
        const auto left = [&](double r) {
            return Segment{0.5 * half_turn * r * c, 1.0 / (r * c), 0.0};
        };
        const auto right = [&](double r) {
            return Segment{0.5 * half_turn * r * c, -1.0 / (r * c), 0.0};
        };
        const auto straight = [&](double l) { return Segment{l * c, 0.0, 0.0}; };
        segments = {
            straight(525.0), left(60.0),  straight(140.0), left(35.0),
            straight(180.0), right(25.0), straight(60.0),  left(45.0),
            straight(250.0), left(80.0),  straight(255.0), left(30.0),
        };
    }
    for (const Segment& seg : segments)
        if (!(seg.length_m > 0.0))
            throw GenerationError("degenerate segment in track layout");
    return TrackCenterline::from_samples(
        trackgen_detail::sample_path(segments, spec.sample_spacing_m), true,
        spec.corridor_half_width_m);
}

// Peak lateral friction coefficient of the configured tire at the static
// quarter-vehicle load, swept over slip angle with the full shear model.
inline double peak_lateral_friction(const VehicleParameters& p) {
    TireSetup setup = p.tire;
    setup.fidelity = TireFidelity::full;
    const double fz = p.chassis.total_mass_kg() * kGravity / 4.0;
    double peak = 0.0;
    const int n = 2000;
    for (int i = 1; i <= n; ++i) {
        const double alpha = 1.2 * static_cast<double>(i) / n;
        const TireForces f = tire_shear({0.0, alpha, 0.0, fz}, setup);
        peak = std::max(peak, std::abs(f.fy_n) / fz);
    }
    return peak;
}

// Highest sustainable straight-line speed: the largest v where some gear
// keeps the engine under its speed ceiling and full-throttle drive force
// covers aerodynamic drag.
inline double straight_line_top_speed(const VehicleParameters& p) {
    const auto drive_force = [&](double v) {
        double best = -std::numeric_limits<double>::infinity();
        for (int g = 0; g < static_cast<int>(p.driveline.gear_ratio.size()); ++g) {
            const double rpm = p.driveline.rpm_at(v, g);
            if (rpm > p.driveline.engine.max_rpm()) continue;
            best = std::max(best, p.driveline.engine.torque(rpm, 1.0) *
                                      p.driveline.gear_ratio[g] /
                                      p.driveline.wheel_radius_m);
        }
        return best;
    };
    const auto feasible = [&](double v) {
        return drive_force(v) >= -aero_wrench(v, p.aero).fx_n;
    };
    double lo = 1.0, hi = 200.0;
    if (!feasible(lo)) throw GenerationError("vehicle cannot hold 1 m/s on the straight");
    if (feasible(hi)) return hi;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

// Quasi-steady reference lap: corner speeds solve v^2*kappa =
// fraction * mu * (g + downforce(v)/mass) by fixed-point iteration (capped
// at the straight-line top speed), then forward/backward passes bound the
// longitudinal acceleration, cyclically over the closed lap.
inline ReferenceLap generate_lap(const TrackCenterline& track,
                                 const VehicleParameters& p, double grip_fraction) {
    if (!(grip_fraction > 0.0) || grip_fraction > 1.0)
        throw GenerationError("grip fraction must be in (0, 1]");
    const double mu = peak_lateral_friction(p);
    const double v_top = straight_line_top_speed(p);
    const double mass = p.chassis.total_mass_kg();
    const double lift_per_v2 = std::max(0.0, -p.aero.lift_area_kgpm);  // N per (m/s)^2

    const auto corner_cap = [&](double kappa_abs) {
        if (kappa_abs < 1e-9) return v_top;
        double v2 = 0.0;
        for (int i = 0; i < 128; ++i) {
            const double ay = grip_fraction * mu * (kGravity + lift_per_v2 * v2 / mass);
            v2 = std::min(v_top * v_top, ay / kappa_abs);
        }
        return std::sqrt(v2);
    };

    const auto& ts = track.samples();
    const std::size_t n = ts.size() - 1;  // unique points; the last duplicates the first
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = corner_cap(std::abs(ts[i].kappa_radpm));

    const double L = track.length_m();
    const auto gap = [&](std::size_t i) {  // arc length from point i to i+1, seam-aware
        return i + 1 < n ? ts[i + 1].s_m - ts[i].s_m : L - ts[n - 1].s_m;
    };
    const auto accel_limit = [&](double speed) {
        double drive = -std::numeric_limits<double>::infinity();
        for (int g = 0; g < static_cast<int>(p.driveline.gear_ratio.size()); ++g) {
            const double rpm = p.driveline.rpm_at(speed, g);
            if (rpm > p.driveline.engine.max_rpm()) continue;
            drive = std::max(drive, p.driveline.engine.torque(rpm, 1.0) *
                                        p.driveline.gear_ratio[g] /
                                        p.driveline.wheel_radius_m);
        }
        const double net = drive + aero_wrench(speed, p.aero).fx_n;  // drag is negative
        return std::clamp(net / mass, 0.0, grip_fraction * mu * kGravity);
    };
    const double brake_limit = grip_fraction * mu * kGravity;

    // Two wraps per direction settle the cyclic profile.
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = (i + 1) % n;
            v[j] = std::min(v[j], std::sqrt(v[i] * v[i] + 2.0 * accel_limit(v[i]) * gap(i)));
        }
        for (std::size_t i = n; i-- > 0;) {
            const std::size_t j = (i + 1) % n;
            v[i] = std::min(v[i], std::sqrt(v[j] * v[j] + 2.0 * brake_limit * gap(i)));
        }
    }

    std::vector<LapSample> rows(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev = (i + n - 1) % n;
        const std::size_t next = (i + 1) % n;
        const double span = gap(prev) + gap(i);
        LapSample& r = rows[i];
        r.s_m = ts[i].s_m;
        r.d_m = 0.0;
        r.v_mps = v[i];
        r.kappa_radpm = ts[i].kappa_radpm;
        r.ax_mps2 = v[i] * (v[next] - v[prev]) / span;
    }
    rows[n] = rows[0];
    rows[n].s_m = L;
    rows[n].kappa_radpm = ts[n].kappa_radpm;
    return ReferenceLap::from_samples(std::move(rows));
}

}  // namespace lapsim
