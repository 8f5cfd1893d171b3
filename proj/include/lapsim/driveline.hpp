#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "lapsim/chassis.hpp"
#include "lapsim/errors.hpp"

namespace lapsim {

// Powertrain, brakes and input actuators.

// Torque table over engine speed (rows, ascending) and throttle position
// (columns, ascending). Lookups interpolate bilinearly and clamp at the
// table edges; grid points are reproduced exactly.
struct EngineMap {
    std::vector<double> rpm;
    std::vector<double> throttle;
    std::vector<std::vector<double>> torque_nm;  // [rpm index][throttle index]

    void validate() const {
        if (rpm.size() < 2 || throttle.size() < 2)
            throw ConfigError("engine map needs at least a 2x2 grid");
        if (!std::is_sorted(rpm.begin(), rpm.end()) ||
            !std::is_sorted(throttle.begin(), throttle.end()))
            throw ConfigError("engine map axes must be ascending");
        if (torque_nm.size() != rpm.size())
            throw ConfigError("engine map row count mismatch");
        for (const auto& row : torque_nm)
            if (row.size() != throttle.size())
                throw ConfigError("engine map column count mismatch");
        for (std::size_t j = 0; j + 1 < throttle.size(); ++j) {
            for (std::size_t i = 0; i < rpm.size(); ++i) {
                if (torque_nm[i][j + 1] < torque_nm[i][j] - 1e-9)
                    throw ConfigError(
                        "engine map must be non-decreasing in throttle");
            }
        }
    }

    double max_rpm() const { return rpm.back(); }

    double torque(double rpm_in, double throttle_in) const {
        const auto [i, tr] = locate(rpm, rpm_in);
        const auto [j, tt] = locate(throttle, throttle_in);
        const double t00 = torque_nm[i][j], t01 = torque_nm[i][j + 1];
        const double t10 = torque_nm[i + 1][j], t11 = torque_nm[i + 1][j + 1];
        const double a = t00 + (t01 - t00) * tt;
        const double b = t10 + (t11 - t10) * tt;
        return a + (b - a) * tr;
    }

    // Smallest throttle whose torque at this engine speed reaches the target;
    // clamps to 0/1 when the target is outside the achievable band. The map
    // is monotone in throttle so a linear solve per bracketing segment is
    // exact.
    double inverse_throttle(double rpm_in, double torque_target) const {
        const double lo = torque(rpm_in, throttle.front());
        const double hi = torque(rpm_in, throttle.back());
        if (torque_target <= lo) return throttle.front();
        if (torque_target >= hi) return throttle.back();
        for (std::size_t j = 0; j + 1 < throttle.size(); ++j) {
            const double a = torque(rpm_in, throttle[j]);
            const double b = torque(rpm_in, throttle[j + 1]);
            if (torque_target <= b) {
                if (b <= a) return throttle[j + 1];
                const double t = (torque_target - a) / (b - a);
                return throttle[j] + t * (throttle[j + 1] - throttle[j]);
            }
        }
        return throttle.back();
    }

private:
    static std::pair<std::size_t, double> locate(const std::vector<double>& axis,
                                                 double v) {
        if (v <= axis.front()) return {0, 0.0};
        if (v >= axis.back()) return {axis.size() - 2, 1.0};
        const auto it = std::upper_bound(axis.begin(), axis.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - axis.begin()) - 1;
        return {i, (v - axis[i]) / (axis[i + 1] - axis[i])};
    }
};

struct ActuatorTiming {
    double dead_s = 0.0;  // pure transport delay, quantized to whole steps
    double tau_s = 0.0;   // first-order time constant, 0 = instantaneous
};

struct DrivelineParameters {
    EngineMap engine;
    std::vector<double> gear_ratio;  // overall engine-to-wheel, descending
    double upshift_rpm = 8800.0;
    double shift_hysteresis_rpm = 600.0;
    double wheel_radius_m = 0.30;
    double i_spin_front_kgm2 = 1.2;   // per front wheel
    double i_spin_rear_kgm2 = 4.6;    // whole rear axle incl. lumped engine
    double brake_gain_nm = 9000.0;    // total brake torque at unit pressure
    double brake_balance_front = 0.58;
    ActuatorTiming steer_act{0.010, 0.030};
    ActuatorTiming throttle_act{0.020, 0.050};
    ActuatorTiming brake_act{0.015, 0.030};
    double max_steer_rad = 0.30;

    double rpm_at(double speed_mps, int gear) const {
        return speed_mps / wheel_radius_m * gear_ratio[static_cast<std::size_t>(gear)] *
               60.0 / (2.0 * std::numbers::pi);
    }
};

// Driver/controller demand handed to the vehicle.
struct ActuationCommand {
    double steer_rad = 0.0;
    double throttle = 0.0;        // 0..1
    double brake_pressure = 0.0;  // 0..1 of unit pressure
    int gear = 0;                 // index into gear_ratio
};

// Engine output torque for a given shaft speed and throttle.
inline double engine_torque(double rpm, double throttle_pos, const EngineMap& map) {
    return map.torque(rpm, throttle_pos);
}

// Lowest gear that keeps the engine below the upshift threshold. With a
// current-gear hint the choice is hysteretic: a downshift happens only once
// the target gear's engine speed has fallen to threshold minus hysteresis,
// which prevents chattering around shift points.
inline int gear_for_speed(double speed_mps, const DrivelineParameters& p,
                          int current = -1) {
    const int n = static_cast<int>(p.gear_ratio.size());
    if (n == 0) throw ConfigError("no gear ratios configured");
    int candidate = n - 1;
    for (int g = 0; g < n; ++g) {
        if (p.rpm_at(speed_mps, g) < p.upshift_rpm) {
            candidate = g;
            break;
        }
    }
    if (current < 0 || current >= n) return candidate;
    if (candidate > current) return candidate;  // over-revving, must upshift
    if (candidate < current &&
        p.rpm_at(speed_mps, candidate) <= p.upshift_rpm - p.shift_hysteresis_rpm)
        return candidate;
    return current;
}

// Brake torque opposing the spin direction. The magnitude is capped at
// i_spin |omega| / t_ref (t_ref fixed at 0.1 s) so the torque can never
// reverse the wheel within a step; at standstill it vanishes.
inline double brake_torque_applied(double omega_radps, double magnitude_nm,
                                   double i_spin_kgm2) {
    constexpr double t_ref_s = 0.1;
    const double cap = i_spin_kgm2 * std::abs(omega_radps) / t_ref_s;
    const double mag = std::min(std::abs(magnitude_nm), cap);
    return omega_radps >= 0.0 ? -mag : mag;
}

// Per-axle brake torque magnitudes at a given pressure.
struct BrakeTorques {
    double front_per_wheel_nm = 0.0;
    double rear_per_wheel_nm = 0.0;
};

inline BrakeTorques brake_torques(double pressure, const DrivelineParameters& p) {
    const double total = std::max(0.0, pressure) * p.brake_gain_nm;
    return {0.5 * total * p.brake_balance_front,
            0.5 * total * (1.0 - p.brake_balance_front)};
}

// Spin accelerations for all four wheels. The rear axle is a spool: both
// rear wheels share one rigid state, so one common acceleration is computed
// from the summed rear torques and written to both slots.
inline std::array<double, 4> wheel_spin_derivatives(
    const std::array<double, 4>& omega_radps,
    const std::array<double, 4>& tire_fx_n, double drive_torque_nm,
    const BrakeTorques& brakes, const DrivelineParameters& p) {
    std::array<double, 4> out;
    for (int i = FL; i <= FR; ++i) {
        const double t_brake = brake_torque_applied(
            omega_radps[i], brakes.front_per_wheel_nm, p.i_spin_front_kgm2);
        out[i] = (t_brake - tire_fx_n[i] * p.wheel_radius_m) / p.i_spin_front_kgm2;
    }
    const double t_brake_rear = brake_torque_applied(
        omega_radps[RL], 2.0 * brakes.rear_per_wheel_nm, p.i_spin_rear_kgm2);
    const double rear_acc =
        (drive_torque_nm + t_brake_rear -
         (tire_fx_n[RL] + tire_fx_n[RR]) * p.wheel_radius_m) /
        p.i_spin_rear_kgm2;
    out[RL] = rear_acc;
    out[RR] = rear_acc;
    return out;
}

// Pure transport delay plus first-order lag, advanced at a fixed period with
// the exact zero-order-hold discretization. Serves the steering column and
// both pedal channels.
class DelayedLag {
public:
    DelayedLag() = default;
    DelayedLag(const ActuatorTiming& timing, double period_s, double initial)
        : tau_s_(timing.tau_s), period_s_(period_s), y_(initial) {
        if (!(period_s > 0.0)) throw ConfigError("actuator period must be positive");
        const auto steps = static_cast<std::size_t>(
            std::llround(timing.dead_s / period_s));
        buf_.assign(steps, initial);
    }

    // Push the newest target, pop the delayed one, advance the lag by one
    // period: y <- target + (y - target) exp(-dt/tau).
    double step(double target) {
        double delayed = target;
        if (!buf_.empty()) {
            delayed = buf_[next_];
            buf_[next_] = target;
            next_ = (next_ + 1) % buf_.size();
        }
        if (tau_s_ > 0.0) {
            y_ = delayed + (y_ - delayed) * std::exp(-period_s_ / tau_s_);
        } else {
            y_ = delayed;
        }
        return y_;
    }

    // Delayed target currently feeding the lag (front of the buffer).
    double pending(double target) const {
        return buf_.empty() ? target : buf_[next_];
    }

    double output() const { return y_; }

    void reset(double value) {
        y_ = value;
        std::fill(buf_.begin(), buf_.end(), value);
        next_ = 0;
    }

private:
    std::vector<double> buf_;
    std::size_t next_ = 0;
    double tau_s_ = 0.0;
    double period_s_ = 1.0;
    double y_ = 0.0;
};

// One fixed-period update of the steering actuator; exact for the
// zero-order-held target.
inline double steering_step(DelayedLag& act, double target_rad) {
    return act.step(target_rad);
}

// Same machinery for throttle/brake pedal channels.
inline double pedal_lag_step(DelayedLag& act, double target) {
    return act.step(target);
}

}  // namespace lapsim
