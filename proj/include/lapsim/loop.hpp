#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lapsim/csv.hpp"
#include "lapsim/errors.hpp"
#include "lapsim/metrics.hpp"
#include "lapsim/track.hpp"
#include "lapsim/vehicle.hpp"

namespace lapsim {

// Closed-loop harness: reference lap handling, sensor models, a one-pole
// state estimator, a feedforward+feedback tracking controller, low-level
// pedal/gear resolution, and the fixed-rate run loop tying them together.
// Everything here is a pure function of (configs, seed): repeated runs are
// bit-identical.

// ---------------------------------------------------------------------------
// Reference lap

struct LapSample {
    double s_m = 0.0;
    double d_m = 0.0;          // target lateral offset, 0 = centerline
    double v_mps = 0.0;        // target speed
    double kappa_radpm = 0.0;  // path curvature
    double ax_mps2 = 0.0;      // target longitudinal acceleration
};

// Target trajectory over one lap, sampled in arc length. Lookups treat the
// lap as periodic so previews past the final sample wrap around.
class ReferenceLap {
public:
    static ReferenceLap from_samples(std::vector<LapSample> samples) {
        ReferenceLap lap;
        lap.samples_ = std::move(samples);
        lap.validate();
        return lap;
    }

    static ReferenceLap load(const std::filesystem::path& path) {
        const CsvTable t = read_csv(path);
        const std::size_t cs = t.require("s_m");
        const std::size_t cd = t.require("d_m");
        const std::size_t cv = t.require("v_mps");
        const std::size_t ck = t.require("kappa_radpm");
        const std::size_t ca = t.require("ax_mps2");
        std::vector<LapSample> samples;
        samples.reserve(t.rows.size());
        for (const auto& r : t.rows)
            samples.push_back({r[cs], r[cd], r[cv], r[ck], r[ca]});
        return from_samples(std::move(samples));
    }

    void save(const std::filesystem::path& path) const {
        std::vector<std::vector<double>> rows;
        rows.reserve(samples_.size());
        for (const auto& p : samples_)
            rows.push_back({p.s_m, p.d_m, p.v_mps, p.kappa_radpm, p.ax_mps2});
        write_csv(path, {"s_m", "d_m", "v_mps", "kappa_radpm", "ax_mps2"}, rows);
    }

    const std::vector<LapSample>& samples() const { return samples_; }
    double length_m() const { return samples_.back().s_m; }

    double max_speed_mps() const {
        double v = 0.0;
        for (const auto& p : samples_) v = std::max(v, p.v_mps);
        return v;
    }

    double d_at(double s) const { return interp(s, &LapSample::d_m); }
    double v_at(double s) const { return interp(s, &LapSample::v_mps); }
    double kappa_at(double s) const { return interp(s, &LapSample::kappa_radpm); }
    double ax_at(double s) const { return interp(s, &LapSample::ax_mps2); }

private:
    void validate() const {
        if (samples_.size() < 2)
            throw ConfigError("reference lap needs at least 2 samples");
        if (samples_.front().s_m < 0.0)
            throw ConfigError("reference lap must start at s >= 0");
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto& p = samples_[i];
            if (!std::isfinite(p.s_m) || !std::isfinite(p.d_m) ||
                !std::isfinite(p.v_mps) || !std::isfinite(p.kappa_radpm) ||
                !std::isfinite(p.ax_mps2))
                throw ConfigError("non-finite reference lap sample at index " +
                                  std::to_string(i));
            if (p.v_mps < 0.0)
                throw ConfigError("negative target speed at index " + std::to_string(i));
            if (i > 0 && p.s_m <= samples_[i - 1].s_m)
                throw ConfigError("reference lap s must increase strictly at index " +
                                  std::to_string(i));
        }
    }

    double interp(double s, double LapSample::*field) const {
        const double lo = samples_.front().s_m;
        const double hi = samples_.back().s_m;
        const double span = hi - lo;
        double w = s;
        if (w < lo || w > hi) {
            w = lo + std::fmod(w - lo, span);
            if (w < lo) w += span;
        }
        const auto it = std::upper_bound(
            samples_.begin(), samples_.end(), w,
            [](double v, const LapSample& p) { return v < p.s_m; });
        const std::size_t j = static_cast<std::size_t>(it - samples_.begin());
        const std::size_t i1 = std::clamp<std::size_t>(j, 1, samples_.size() - 1);
        const LapSample& a = samples_[i1 - 1];
        const LapSample& b = samples_[i1];
        const double t = (w - a.s_m) / (b.s_m - a.s_m);
        return a.*field + t * (b.*field - a.*field);
    }

    std::vector<LapSample> samples_;
};

// Scales the target speed by `factor` and the target longitudinal
// acceleration linearly with it; every geometric channel (s, d, curvature)
// is carried over bit-identically, so the path is unchanged and the implied
// lateral acceleration v^2*kappa scales with factor^2.
inline ReferenceLap scale_velocity_profile(const ReferenceLap& lap, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor))
        throw ConfigError("velocity scale factor must be positive");
    std::vector<LapSample> scaled = lap.samples();
    for (auto& p : scaled) {
        p.v_mps *= factor;
        p.ax_mps2 *= factor;
    }
    return ReferenceLap::from_samples(std::move(scaled));
}

// ---------------------------------------------------------------------------
// Sensing and estimation

// Ground-truth channels exposed to the sensor models.
struct Measurement {
    double x_m = 0.0;
    double y_m = 0.0;
    double yaw_rad = 0.0;
    double vx_mps = 0.0;
    double vy_mps = 0.0;
    double yaw_rate_radps = 0.0;
    double ax_mps2 = 0.0;
    double ay_mps2 = 0.0;
};

struct SensorConfig {
    bool enabled = false;
    // Default seed for standalone runs; batch runners derive one seed per
    // run and pass it to run_closed_loop directly.
    std::uint64_t seed = 0;
    double pos_std_m = 0.02;
    double vel_std_mps = 0.05;
    double yaw_std_rad = 0.002;
    double yaw_rate_std_radps = 0.01;
    double accel_std_mps2 = 0.2;

    void validate() const {
        for (double s : {pos_std_m, vel_std_mps, yaw_std_rad, yaw_rate_std_radps,
                         accel_std_mps2})
            if (!(s >= 0.0) || !std::isfinite(s))
                throw ConfigError("sensor noise std must be non-negative");
    }
};

// Additive Gaussian noise per channel. One standard normal is drawn per
// channel in a fixed order and scaled by its std, so changing one channel's
// std never reshuffles the others' noise. Disabled -> exact pass-through
// (the rng is not advanced).
inline Measurement sense(const Measurement& truth, const SensorConfig& cfg,
                         std::mt19937_64& rng) {
    if (!cfg.enabled) return truth;
    std::normal_distribution<double> n01(0.0, 1.0);
    Measurement m = truth;
    m.x_m += cfg.pos_std_m * n01(rng);
    m.y_m += cfg.pos_std_m * n01(rng);
    m.yaw_rad += cfg.yaw_std_rad * n01(rng);
    m.vx_mps += cfg.vel_std_mps * n01(rng);
    m.vy_mps += cfg.vel_std_mps * n01(rng);
    m.yaw_rate_radps += cfg.yaw_rate_std_radps * n01(rng);
    m.ax_mps2 += cfg.accel_std_mps2 * n01(rng);
    m.ay_mps2 += cfg.accel_std_mps2 * n01(rng);
    return m;
}

// One-pole low-pass on every measurement channel, stepped at a fixed period.
// An infinite cutoff makes alpha exactly 1, i.e. pass-through. Yaw is
// filtered on its increment so the +-pi seam does not tear the state.
class Estimator {
public:
    Estimator(double cutoff_hz, double period_s, const Measurement& initial)
        : y_(initial) {
        if (!(cutoff_hz > 0.0)) throw ConfigError("estimator cutoff must be positive");
        if (!(period_s > 0.0)) throw ConfigError("estimator period must be positive");
        alpha_ = 1.0 - std::exp(-2.0 * M_PI * cutoff_hz * period_s);
    }

    const Measurement& step(const Measurement& m) {
        y_.x_m += alpha_ * (m.x_m - y_.x_m);
        y_.y_m += alpha_ * (m.y_m - y_.y_m);
        y_.yaw_rad = wrap_angle(y_.yaw_rad + alpha_ * wrap_angle(m.yaw_rad - y_.yaw_rad));
        y_.vx_mps += alpha_ * (m.vx_mps - y_.vx_mps);
        y_.vy_mps += alpha_ * (m.vy_mps - y_.vy_mps);
        y_.yaw_rate_radps += alpha_ * (m.yaw_rate_radps - y_.yaw_rate_radps);
        y_.ax_mps2 += alpha_ * (m.ax_mps2 - y_.ax_mps2);
        y_.ay_mps2 += alpha_ * (m.ay_mps2 - y_.ay_mps2);
        return y_;
    }

    const Measurement& output() const { return y_; }
    double alpha() const { return alpha_; }

private:
    Measurement y_;
    double alpha_ = 1.0;
};

// ---------------------------------------------------------------------------
// Controller

struct ControllerConfig {
    double period_s = 0.0096;  // must be a whole number of physics steps
    // Lateral path tracking: curvature feedforward plus proportional
    // lateral-error and heading-error feedback.
    double k_lat_err = 0.08;   // rad of steering per m of lateral error
    double k_heading = 0.9;    // rad per rad of heading error
    double k_curv_ff = 1.0;    // gain on the kinematic feedforward angle
    double preview_time_s = 0.25;
    // Longitudinal: reference acceleration plus proportional speed error.
    double k_speed = 0.8;          // (m/s^2) per (m/s)
    double a_min_mps2 = -25.0;
    double a_max_mps2 = 12.0;
    double accel_deadband_mps2 = 0.05;
    double max_steer_rad = 0.30;
    double max_brake = 1.0;
    // Estimator cutoff; infinity = pass-through.
    double estimator_cutoff_hz = std::numeric_limits<double>::infinity();

    void validate(double step_s) const {
        if (!(step_s > 0.0)) throw ConfigError("physics step must be positive");
        if (!(period_s > 0.0)) throw ConfigError("controller period must be positive");
        const double steps = period_s / step_s;
        if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
            throw ConfigError("controller period must be a whole number of physics steps");
        for (double g : {k_lat_err, k_heading, k_curv_ff, k_speed})
            if (!(g >= 0.0) || !std::isfinite(g))
                throw ConfigError("controller gains must be non-negative");
        if (!(preview_time_s >= 0.0)) throw ConfigError("preview time must be non-negative");
        if (!(a_max_mps2 > 0.0) || !(a_min_mps2 < 0.0))
            throw ConfigError("acceleration limits must bracket zero");
        if (!(accel_deadband_mps2 >= 0.0))
            throw ConfigError("acceleration deadband must be non-negative");
        if (!(max_steer_rad > 0.0)) throw ConfigError("steering limit must be positive");
        if (!(max_brake > 0.0)) throw ConfigError("brake limit must be positive");
        if (!(estimator_cutoff_hz > 0.0))
            throw ConfigError("estimator cutoff must be positive");
    }
};

// The controller's view of the vehicle: estimated curvilinear pose plus
// forward speed.
struct ControllerEstimate {
    double s_m = 0.0;
    double d_m = 0.0;
    double rel_heading_rad = 0.0;
    double v_mps = 0.0;
};

// Steering target: kinematic curvature feedforward previewed ahead by
// preview_time at the current speed, plus proportional feedback on lateral
// offset and heading error. Being left of the target line (d > d_target)
// steers right.
inline double lateral_control(const ControllerEstimate& est, const ReferenceLap& lap,
                              const ControllerConfig& cfg, double wheelbase_m) {
    const double s_preview = est.s_m + std::max(est.v_mps, 0.0) * cfg.preview_time_s;
    const double feedforward = std::atan(wheelbase_m * lap.kappa_at(s_preview));
    const double steer = cfg.k_curv_ff * feedforward +
                         cfg.k_lat_err * (lap.d_at(est.s_m) - est.d_m) -
                         cfg.k_heading * est.rel_heading_rad;
    return std::clamp(steer, -cfg.max_steer_rad, cfg.max_steer_rad);
}

// Longitudinal target acceleration: reference feedforward plus proportional
// speed error, clamped to the configured envelope.
inline double longitudinal_control(const ControllerEstimate& est, const ReferenceLap& lap,
                                   const ControllerConfig& cfg) {
    const double a = lap.ax_at(est.s_m) + cfg.k_speed * (lap.v_at(est.s_m) - est.v_mps);
    return std::clamp(a, cfg.a_min_mps2, cfg.a_max_mps2);
}

// Resolves a target acceleration into pedals and gear. The wheel force
// demand is mass * a_target plus drag compensation; positive demand inverts
// the engine map at the hysteretically selected gear, negative demand maps
// to brake pressure through the brake gain. A deadband around zero coasts.
// Throttle and brake are never both nonzero.
inline ActuationCommand low_level(double a_target_mps2, double v_mps, int gear_hint,
                                  const VehicleParameters& p,
                                  const ControllerConfig& cfg) {
    ActuationCommand u;
    const double v = std::max(v_mps, 0.0);
    u.gear = gear_for_speed(v, p.driveline, gear_hint);
    if (std::abs(a_target_mps2) <= cfg.accel_deadband_mps2) return u;
    const double force_n = p.chassis.total_mass_kg() * a_target_mps2 -
                           aero_wrench(v, p.aero).fx_n;
    const double r = p.driveline.wheel_radius_m;
    if (force_n >= 0.0) {
        const double torque = force_n * r / p.driveline.gear_ratio[u.gear];
        u.throttle = p.driveline.engine.inverse_throttle(p.driveline.rpm_at(v, u.gear),
                                                         torque);
    } else {
        u.brake_pressure = std::min(cfg.max_brake, -force_n * r / p.driveline.brake_gain_nm);
    }
    return u;
}

// ---------------------------------------------------------------------------
// Run loop

struct LoopConfig {
    ControllerConfig controller;
    SensorConfig sensors;
    double step_s = 800e-6;
    double timeout_s = 600.0;

    void validate() const {
        controller.validate(step_s);
        sensors.validate();
        if (!(timeout_s > 0.0)) throw ConfigError("timeout must be positive");
    }
};

struct RunOutcome {
    bool completed = false;
    double lap_time_s = 0.0;  // valid when completed
    double sim_time_s = 0.0;  // simulated time elapsed either way
    double distance_m = 0.0;  // arc length covered
    std::string fault;        // empty unless the run ended on a fault
    std::vector<TraceSample> trace;  // ground-truth (s, d) at every physics step
    double median_wheel_load_n = 0.0;
};

namespace loop_detail {

inline double median_of(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const auto lower = std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + *lower);
    }
    return m;
}

}  // namespace loop_detail

// One closed-loop lap of the requested model variant around the track,
// following the reference lap. Fixed-rate scheduling: the controller runs
// every period, the physics integrate at step_s between ticks, actuation
// commands pass through per-channel transport delays quantized to physics
// steps (skipped entirely by the actuator-bypass variant). Faults inside the
// run (off-corridor, non-finite states, impossible trim) are recorded as a
// non-completed outcome, never thrown.
inline RunOutcome run_closed_loop(const VehicleParameters& base, ModelVariant variant,
                                  const ReferenceLap& lap, const TrackCenterline& track,
                                  const LoopConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    RunOutcome out;
    const double h = cfg.step_s;

    if (lap.max_speed_mps() < 0.5) {
        out.fault = "reference lap never exceeds walking pace";
        return out;
    }

    try {
        const VehicleParameters p = make_variant(base, variant);
        const double wheelbase = p.chassis.lf_m + p.chassis.lr_m;
        const double s_max = track.length_m();

        const TrackSample start = track.at(0.0);
        const TrimPoint trim =
            initial_state(p, start.x_m, start.y_m, start.psi_rad, lap.v_at(0.0));
        VehicleState x = trim.state;

        ActuationCommand u_cmd = trim.command;  // controller output, updated per tick
        ActuationCommand u_eff = u_cmd;         // dead-time delayed, fed to the model
        DelayedLag steer_delay({p.driveline.steer_act.dead_s, 0.0}, h, u_cmd.steer_rad);
        DelayedLag throttle_delay({p.driveline.throttle_act.dead_s, 0.0}, h, u_cmd.throttle);
        DelayedLag brake_delay({p.driveline.brake_act.dead_s, 0.0}, h, u_cmd.brake_pressure);

        std::mt19937_64 rng(seed);
        std::optional<Estimator> estimator;
        const auto steps_per_tick =
            static_cast<std::int64_t>(std::llround(cfg.controller.period_s / h));
        const auto max_steps = static_cast<std::int64_t>(std::llround(cfg.timeout_s / h));

        double hint_truth = 0.0;
        double hint_est = 0.0;
        double s_unwrapped = 0.0;
        bool first_sample = true;
        std::vector<double> wheel_loads;
        out.trace.reserve(1 << 16);
        wheel_loads.reserve(out.trace.capacity() * 4);

        const auto record_loads = [&](const VehicleState& state) {
            const auto fz = wheel_vertical_loads(state, p);
            wheel_loads.insert(wheel_loads.end(), fz.begin(), fz.end());
        };

        for (std::int64_t k = 0;; ++k) {
            const CurvilinearPose proj =
                track.project(x[sx::x], x[sx::y], x[sx::yaw], hint_truth);
            if (first_sample) {
                // A start pose projecting just behind the seam counts as
                // slightly negative progress, not a completed lap.
                s_unwrapped = (track.closed() && proj.s_m > 0.5 * s_max)
                                  ? proj.s_m - s_max
                                  : proj.s_m;
                first_sample = false;
            } else {
                s_unwrapped += track.arc_delta(hint_truth, proj.s_m);
            }
            hint_truth = proj.s_m;
            out.trace.push_back({std::max(s_unwrapped, 0.0), proj.d_m});
            record_loads(x);
            out.sim_time_s = static_cast<double>(k) * h;
            out.distance_m = std::max(s_unwrapped, 0.0);

            if (s_unwrapped >= s_max) {
                const auto& prev = out.trace[out.trace.size() - 2];
                const double span = s_unwrapped - prev.s_m;
                const double frac = span > 0.0 ? (s_max - prev.s_m) / span : 1.0;
                out.lap_time_s = (static_cast<double>(k) - 1.0 + frac) * h;
                out.completed = true;
                break;
            }
            if (k >= max_steps) {
                out.fault = "timeout before lap completion";
                break;
            }

            const Wrench external = track.external_wrench(proj, p.chassis.total_mass_kg());

            if (k % steps_per_tick == 0) {
                const ModelOutputs mo = model_outputs(x, u_eff, external, p);
                Measurement truth;
                truth.x_m = x[sx::x];
                truth.y_m = x[sx::y];
                truth.yaw_rad = x[sx::yaw];
                truth.vx_mps = x[sx::vx];
                truth.vy_mps = x[sx::vy];
                truth.yaw_rate_radps = x[sx::yaw_rate];
                truth.ax_mps2 = mo.ax_mps2;
                truth.ay_mps2 = mo.ay_mps2;
                const Measurement meas = sense(truth, cfg.sensors, rng);
                if (!estimator)
                    estimator.emplace(cfg.controller.estimator_cutoff_hz,
                                      cfg.controller.period_s, meas);
                const Measurement& est = estimator->step(meas);

                const CurvilinearPose ep =
                    track.project(est.x_m, est.y_m, est.yaw_rad, hint_est);
                hint_est = ep.s_m;
                const ControllerEstimate ce{ep.s_m, ep.d_m, ep.rel_heading_rad,
                                            est.vx_mps};
                const double steer = lateral_control(ce, lap, cfg.controller, wheelbase);
                const double a_target = longitudinal_control(ce, lap, cfg.controller);
                u_cmd = low_level(a_target, est.vx_mps, u_cmd.gear, p, cfg.controller);
                u_cmd.steer_rad = steer;
            }

            if (p.bypass_actuators) {
                u_eff = u_cmd;
            } else {
                u_eff.steer_rad = steer_delay.step(u_cmd.steer_rad);
                u_eff.throttle = throttle_delay.step(u_cmd.throttle);
                u_eff.brake_pressure = brake_delay.step(u_cmd.brake_pressure);
                u_eff.gear = u_cmd.gear;
            }

            const auto f = [&p, &external](const VehicleState& s,
                                           const ActuationCommand& u) {
                return vehicle_derivatives(s, u, external, p);
            };
            x = dp45_step(f, x, u_eff, h);
        }

        out.median_wheel_load_n = loop_detail::median_of(wheel_loads);
    } catch (const SimError& e) {
        out.completed = false;
        out.fault = e.what();
    }
    return out;
}

}  // namespace lapsim
