#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapsim/chassis.hpp"
#include "lapsim/constants.hpp"
#include "lapsim/csv.hpp"
#include "lapsim/errors.hpp"

namespace lapsim {

// Racetrack centerline sampled in arc length, plus the operations the
// simulation needs from it: curvilinear projection, gravity components
// induced by banking and slope, and lifting the planar pose onto the surface.
//
// Surface sign conventions, used consistently here and in the metrics:
//   d         positive to the driving-direction left.
//   bank_rad  positive raises the right edge, so on a left-hand corner a
//             positive bank pushes the car toward the inside (+d).
//   slope_rad positive means uphill in the driving direction.
// The 3-D pose exported by lift_to_3d inherits roll/pitch in these surface
// conventions (roll = bank and pitch = slope when the car is aligned with
// the track), independent of the body-frame suspension angles.

struct TrackSample {
    double s_m = 0.0;
    double x_m = 0.0;
    double y_m = 0.0;
    double z_m = 0.0;
    double psi_rad = 0.0;
    double kappa_radpm = 0.0;
    double bank_rad = 0.0;
    double slope_rad = 0.0;
};

struct CurvilinearPose {
    double s_m = 0.0;
    double d_m = 0.0;
    double rel_heading_rad = 0.0;
};

struct Pose3 {
    double x_m = 0.0;
    double y_m = 0.0;
    double z_m = 0.0;
    double roll_rad = 0.0;
    double pitch_rad = 0.0;
    double yaw_rad = 0.0;
};

inline double wrap_angle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

class TrackCenterline {
  public:
    static constexpr double kMaxSpacingM = 2.0;
    static constexpr double kDefaultCorridorHalfWidthM = 15.0;

    static TrackCenterline from_samples(std::vector<TrackSample> samples, bool closed,
                                        double corridor_half_width_m = kDefaultCorridorHalfWidthM) {
        TrackCenterline t;
        t.samples_ = std::move(samples);
        t.closed_ = closed;
        t.corridor_half_width_m_ = corridor_half_width_m;
        t.validate();
        return t;
    }

    // Loads `<name>.csv` plus the sidecar `<name>.meta.json` holding the
    // closed-loop flag (and optionally the corridor half-width).
    static TrackCenterline load(const std::filesystem::path& csv_path) {
        const CsvTable table = read_csv(csv_path);
        const std::size_t ci_s = table.require("s_m");
        const std::size_t ci_x = table.require("x_m");
        const std::size_t ci_y = table.require("y_m");
        const std::size_t ci_z = table.require("z_m");
        const std::size_t ci_psi = table.require("psi_rad");
        const std::size_t ci_kap = table.require("kappa_radpm");
        const std::size_t ci_bank = table.require("bank_rad");
        const std::size_t ci_slope = table.require("slope_rad");
        std::vector<TrackSample> rows;
        rows.reserve(table.rows.size());
        for (const auto& r : table.rows) {
            TrackSample ts;
            ts.s_m = r[ci_s];
            ts.x_m = r[ci_x];
            ts.y_m = r[ci_y];
            ts.z_m = r[ci_z];
            ts.psi_rad = r[ci_psi];
            ts.kappa_radpm = r[ci_kap];
            ts.bank_rad = r[ci_bank];
            ts.slope_rad = r[ci_slope];
            rows.push_back(ts);
        }

        bool closed = false;
        double corridor = kDefaultCorridorHalfWidthM;
        const std::filesystem::path meta = sidecar_path(csv_path);
        if (std::filesystem::exists(meta)) {
            std::ifstream in(meta);
            if (!in) throw ConfigError("cannot open track metadata: " + meta.string());
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("malformed track metadata " + meta.string() + ": " + e.what());
            }
            closed = j.value("closed", false);
            corridor = j.value("corridor_half_width_m", kDefaultCorridorHalfWidthM);
        }
        return from_samples(std::move(rows), closed, corridor);
    }

    void save(const std::filesystem::path& csv_path) const {
        std::vector<std::vector<double>> rows;
        rows.reserve(samples_.size());
        for (const auto& ts : samples_)
            rows.push_back({ts.s_m, ts.x_m, ts.y_m, ts.z_m, ts.psi_rad, ts.kappa_radpm,
                            ts.bank_rad, ts.slope_rad});
        write_csv(csv_path,
                  {"s_m", "x_m", "y_m", "z_m", "psi_rad", "kappa_radpm", "bank_rad", "slope_rad"},
                  rows);
        nlohmann::json j;
        j["closed"] = closed_;
        j["corridor_half_width_m"] = corridor_half_width_m_;
        std::ofstream out(sidecar_path(csv_path));
        if (!out) throw ConfigError("cannot write track metadata for " + csv_path.string());
        out << j.dump(2) << '\n';
    }

    double length_m() const { return samples_.back().s_m; }
    bool closed() const { return closed_; }
    double corridor_half_width_m() const { return corridor_half_width_m_; }
    const std::vector<TrackSample>& samples() const { return samples_; }

    // Arc position folded into [0, length) for closed tracks, clamped for open.
    double wrap_s(double s) const {
        const double L = length_m();
        if (closed_) {
            double r = std::fmod(s, L);
            if (r < 0.0) r += L;
            return r;
        }
        return std::clamp(s, 0.0, L);
    }

    // Signed difference s_b - s_a along the shortest way around the lap.
    double arc_delta(double s_a, double s_b) const {
        const double L = length_m();
        double d = wrap_s(s_b) - wrap_s(s_a);
        if (closed_) {
            if (d > 0.5 * L) d -= L;
            if (d < -0.5 * L) d += L;
        }
        return d;
    }

    // All channels linearly interpolated at arc position s (seam-wrapped).
    TrackSample at(double s) const {
        const double sw = wrap_s(s);
        const std::size_t i = segment_of(sw);
        const TrackSample& a = samples_[i];
        const TrackSample& b = samples_[i + 1];
        const double u = (sw - a.s_m) / (b.s_m - a.s_m);
        TrackSample out;
        out.s_m = sw;
        out.x_m = a.x_m + u * (b.x_m - a.x_m);
        out.y_m = a.y_m + u * (b.y_m - a.y_m);
        out.z_m = a.z_m + u * (b.z_m - a.z_m);
        out.psi_rad = wrap_angle(a.psi_rad + u * wrap_angle(b.psi_rad - a.psi_rad));
        out.kappa_radpm = a.kappa_radpm + u * (b.kappa_radpm - a.kappa_radpm);
        out.bank_rad = a.bank_rad + u * (b.bank_rad - a.bank_rad);
        out.slope_rad = a.slope_rad + u * (b.slope_rad - a.slope_rad);
        return out;
    }

    // Foot-point search around hint_s. The centerline is piecewise linear, so
    // each segment has a closed-form foot; the search widens symmetrically
    // from the hint until no segment within a stall window improves, then
    // falls back to a full scan if the local result is not inside the
    // corridor. Throws TrackFault once the best foot is beyond the corridor.
    CurvilinearPose project(double x, double y, double heading, double hint_s) const {
        const std::size_t n_seg = samples_.size() - 1;
        Foot best = foot_on_segment(segment_of(wrap_s(hint_s)), x, y);
        std::size_t stall = 0;
        const std::size_t start = best.segment;
        for (std::size_t k = 1; k < n_seg && stall < kStallWindow; ++k) {
            bool improved = false;
            const long fwd = static_cast<long>(start) + static_cast<long>(k);
            const long bwd = static_cast<long>(start) - static_cast<long>(k);
            for (const long raw : {fwd, bwd}) {
                long idx = raw;
                if (closed_) {
                    idx %= static_cast<long>(n_seg);
                    if (idx < 0) idx += static_cast<long>(n_seg);
                } else if (idx < 0 || idx >= static_cast<long>(n_seg)) {
                    continue;
                }
                const Foot f = foot_on_segment(static_cast<std::size_t>(idx), x, y);
                if (f.dist2 < best.dist2) {
                    best = f;
                    improved = true;
                }
            }
            stall = improved ? 0 : stall + 1;
        }
        const double half_w = corridor_half_width_m_;
        if (best.dist2 > half_w * half_w) {
            for (std::size_t i = 0; i < n_seg; ++i) {
                const Foot f = foot_on_segment(i, x, y);
                if (f.dist2 < best.dist2) best = f;
            }
        }

        CurvilinearPose cp = to_pose(best, x, y, heading);
        if (std::abs(cp.d_m) > half_w)
            throw TrackFault("off track: |d| = " + std::to_string(std::abs(cp.d_m)) +
                             " m at s = " + std::to_string(cp.s_m) +
                             " exceeds corridor half-width " + std::to_string(half_w) + " m");
        return cp;
    }

    // Gravity felt by the planar model on a banked or sloped surface, rotated
    // into the body frame. Positive bank pulls toward +d, positive slope pulls
    // backward; the vertical entry removes the share of weight the tilted
    // surface no longer carries. Moments are zero.
    Wrench external_wrench(const CurvilinearPose& pose, double mass_kg) const {
        const TrackSample c = at(pose.s_m);
        const double f_lat = mass_kg * kGravity * std::sin(c.bank_rad);
        const double f_lon = -mass_kg * kGravity * std::sin(c.slope_rad);
        const double mu = pose.rel_heading_rad;
        Wrench w;
        w.fx_n = std::cos(mu) * f_lon + std::sin(mu) * f_lat;
        w.fy_n = -std::sin(mu) * f_lon + std::cos(mu) * f_lat;
        w.fz_n = mass_kg * kGravity * (1.0 - std::cos(c.bank_rad) * std::cos(c.slope_rad));
        return w;
    }

    // Planar pose lifted onto the track surface: x/y/yaw pass through, height
    // and attitude come from the surface at the projected (s, d). Exported
    // roll/pitch use the surface conventions stated at the top of this file.
    Pose3 lift_to_3d(double x, double y, double heading, double hint_s) const {
        const CurvilinearPose cp = project(x, y, heading, hint_s);
        const TrackSample c = at(cp.s_m);
        const double mu = cp.rel_heading_rad;
        Pose3 p;
        p.x_m = x;
        p.y_m = y;
        p.z_m = c.z_m - cp.d_m * std::sin(c.bank_rad);
        p.roll_rad = c.bank_rad * std::cos(mu) + c.slope_rad * std::sin(mu);
        p.pitch_rad = c.slope_rad * std::cos(mu) - c.bank_rad * std::sin(mu);
        p.yaw_rad = wrap_angle(heading);
        return p;
    }

  private:
    struct Foot {
        std::size_t segment = 0;
        double u = 0.0;  // parameter along the segment, in [0, 1]
        double x = 0.0;
        double y = 0.0;
        double dist2 = 0.0;
    };

    static constexpr std::size_t kStallWindow = 32;

    static std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
        std::filesystem::path p = csv_path;
        p.replace_extension();
        p += ".meta.json";
        return p;
    }

    // Index of the segment containing arc position sw (already wrapped).
    std::size_t segment_of(double sw) const {
        const auto it = std::upper_bound(
            samples_.begin(), samples_.end(), sw,
            [](double v, const TrackSample& ts) { return v < ts.s_m; });
        std::size_t i = static_cast<std::size_t>(it - samples_.begin());
        if (i == 0) return 0;
        i -= 1;
        return std::min(i, samples_.size() - 2);
    }

    Foot foot_on_segment(std::size_t i, double x, double y) const {
        const TrackSample& a = samples_[i];
        const TrackSample& b = samples_[i + 1];
        const double ex = b.x_m - a.x_m;
        const double ey = b.y_m - a.y_m;
        const double len2 = ex * ex + ey * ey;
        double u = ((x - a.x_m) * ex + (y - a.y_m) * ey) / len2;
        u = std::clamp(u, 0.0, 1.0);
        Foot f;
        f.segment = i;
        f.u = u;
        f.x = a.x_m + u * ex;
        f.y = a.y_m + u * ey;
        const double dx = x - f.x;
        const double dy = y - f.y;
        f.dist2 = dx * dx + dy * dy;
        return f;
    }

    CurvilinearPose to_pose(const Foot& f, double x, double y, double heading) const {
        const TrackSample& a = samples_[f.segment];
        const TrackSample& b = samples_[f.segment + 1];
        const double ex = b.x_m - a.x_m;
        const double ey = b.y_m - a.y_m;
        const double len = std::sqrt(ex * ex + ey * ey);
        const double tx = ex / len;
        const double ty = ey / len;
        CurvilinearPose cp;
        cp.s_m = wrap_s(a.s_m + f.u * (b.s_m - a.s_m));
        // Left normal of the travel direction, so d is positive to the left.
        cp.d_m = -ty * (x - f.x) + tx * (y - f.y);
        const double psi_c = wrap_angle(a.psi_rad + f.u * wrap_angle(b.psi_rad - a.psi_rad));
        cp.rel_heading_rad = wrap_angle(heading - psi_c);
        return cp;
    }

    void validate() const {
        if (samples_.size() < 3) throw TrackFault("centerline needs at least 3 samples");
        if (std::abs(samples_.front().s_m) > 1e-9)
            throw TrackFault("centerline must start at s = 0");
        for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
            const TrackSample& a = samples_[i];
            const TrackSample& b = samples_[i + 1];
            const double ds = b.s_m - a.s_m;
            if (ds <= 1e-9)
                throw TrackFault("arc positions must be strictly increasing near s = " +
                                 std::to_string(a.s_m));
            if (ds > kMaxSpacingM + 1e-9)
                throw TrackFault("sample spacing " + std::to_string(ds) + " m near s = " +
                                 std::to_string(a.s_m) + " exceeds " +
                                 std::to_string(kMaxSpacingM) + " m");
            const double ex = b.x_m - a.x_m;
            const double ey = b.y_m - a.y_m;
            if (ex * ex + ey * ey < 1e-18)
                throw TrackFault("coincident plan positions near s = " + std::to_string(a.s_m));
        }
        if (closed_) {
            const TrackSample& a = samples_.front();
            const TrackSample& b = samples_.back();
            if (std::abs(a.x_m - b.x_m) > 1e-6 || std::abs(a.y_m - b.y_m) > 1e-6 ||
                std::abs(a.z_m - b.z_m) > 1e-6)
                throw TrackFault("closed track does not return to its start point");
            if (std::abs(wrap_angle(a.psi_rad - b.psi_rad)) > 1e-6)
                throw TrackFault("closed track heading mismatch across the seam");
        }
        // Heading must advance like the stated curvature. Segments where the
        // curvature steps (corner entry/exit of piecewise-arc geometry) carry
        // no usable finite difference and are skipped.
        for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
            const TrackSample& a = samples_[i];
            const TrackSample& b = samples_[i + 1];
            const double ka = a.kappa_radpm;
            const double kb = b.kappa_radpm;
            if (std::abs(ka - kb) > 0.02 * std::max(std::abs(ka), std::abs(kb)) + 1e-6) continue;
            const double ds = b.s_m - a.s_m;
            const double rate = wrap_angle(b.psi_rad - a.psi_rad) / ds;
            const double k_mid = 0.5 * (ka + kb);
            if (std::abs(k_mid) < 1e-3) {
                if (std::abs(rate) > 1e-3)
                    throw TrackFault("heading drifts on straight stretch near s = " +
                                     std::to_string(a.s_m));
            } else if (std::abs(rate - k_mid) > 0.05 * std::abs(k_mid)) {
                throw TrackFault("curvature inconsistent with heading near s = " +
                                 std::to_string(a.s_m));
            }
        }
    }

    std::vector<TrackSample> samples_;
    bool closed_ = false;
    double corridor_half_width_m_ = kDefaultCorridorHalfWidthM;
};

}  // namespace lapsim
