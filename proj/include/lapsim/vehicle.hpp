#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "lapsim/aero.hpp"
#include "lapsim/chassis.hpp"
#include "lapsim/constants.hpp"
#include "lapsim/driveline.hpp"
#include "lapsim/errors.hpp"
#include "lapsim/integrator.hpp"
#include "lapsim/tire.hpp"

namespace lapsim {

// Full state-space race car model: the submodels are composed into one
// derivative function dx/dt = f(x, u, external wrench).

inline constexpr std::size_t kStateCount = 35;
using VehicleState = StateVec<kStateCount>;

// Canonical state layout. Per-wheel blocks are indexed with the Wheel enum
// (fl, fr, rl, rr).
namespace sx {
inline constexpr int x = 0;                  // world position of the CoG
inline constexpr int y = 1;
inline constexpr int yaw = 2;
inline constexpr int heave = 3;              // body displacements from static
inline constexpr int roll = 4;
inline constexpr int pitch = 5;
inline constexpr int vx = 6;                 // body-frame velocities
inline constexpr int vy = 7;
inline constexpr int yaw_rate = 8;
inline constexpr int heave_rate = 9;
inline constexpr int roll_rate = 10;
inline constexpr int pitch_rate = 11;
inline constexpr int wheel_heave = 12;       // +wheel, from static equilibrium
inline constexpr int wheel_heave_rate = 16;  // +wheel
inline constexpr int wheel_spin = 20;        // +wheel, rad/s
inline constexpr int slip_angle_lag = 24;    // +wheel, transient slip angle
inline constexpr int slip_ratio_lag = 28;    // +wheel, transient slip ratio
inline constexpr int steer = 32;             // achieved actuator values
inline constexpr int throttle = 33;
inline constexpr int brake = 34;
}  // namespace sx

enum class TireFidelity { full, simple, linear };

struct TireSetup {
    TireFidelity fidelity = TireFidelity::full;
    MF2006Parameters full;
    MFSimpleParameters simple;
    LinearTireParameters linear;
    double vertical_rate_npm = 260000.0;
    double unloaded_radius_m = 0.30;  // must match the driveline wheel radius
    double sigma_alpha_m = 0.35;      // lateral relaxation length
    double sigma_kappa_m = 0.12;      // longitudinal relaxation length
    double fit_load_n = 2200.0;       // median per-wheel load of a reference run
};

struct VehicleParameters {
    ChassisParameters chassis;
    TireSetup tire;
    AeroParameters aero;
    DrivelineParameters driveline;

    // Structural switches used by the simplified model variants.
    bool zero_track_width = false;
    bool zero_cog_height = false;
    bool bypass_actuators = false;

    // Slip kinematics are evaluated against max(|v|, v_low) so slip stays
    // defined through a standing start.
    double v_low_mps = 1.0;

    void validate() const {
        const auto fail = [](const std::string& what) { throw ConfigError(what); };
        if (chassis.m_sprung_kg <= 0.0) fail("sprung mass must be positive");
        for (double m : chassis.m_unsprung_kg)
            if (m <= 0.0) fail("unsprung masses must be positive");
        if (chassis.ixx_kgm2 <= 0.0 || chassis.iyy_kgm2 <= 0.0 || chassis.izz_kgm2 <= 0.0)
            fail("inertias must be positive");
        if (chassis.lf_m <= 0.0 || chassis.lr_m <= 0.0) fail("axle distances must be positive");
        if (chassis.bf_m < 0.0 || chassis.br_m < 0.0) fail("track widths must be non-negative");
        for (double k : chassis.k_spring_npm)
            if (k <= 0.0) fail("spring rates must be positive");
        for (double k : chassis.k_damper_nspm)
            if (k < 0.0) fail("damper rates must be non-negative");
        if (chassis.travel_limit_m <= 0.0) fail("travel limit must be positive");
        if (tire.vertical_rate_npm <= 0.0) fail("tire vertical rate must be positive");
        if (tire.sigma_alpha_m <= 0.0 || tire.sigma_kappa_m <= 0.0)
            fail("relaxation lengths must be positive");
        if (tire.fit_load_n <= 0.0) fail("fit load must be positive");
        if (std::abs(tire.unloaded_radius_m - driveline.wheel_radius_m) > 1e-12)
            fail("tire radius and driveline wheel radius disagree");
        if (aero.drag_area_kgpm < 0.0) fail("drag area must be non-negative");
        if (driveline.gear_ratio.empty()) fail("no gear ratios configured");
        for (double g : driveline.gear_ratio)
            if (g <= 0.0) fail("gear ratios must be positive");
        if (driveline.wheel_radius_m <= 0.0) fail("wheel radius must be positive");
        if (driveline.brake_balance_front < 0.0 || driveline.brake_balance_front > 1.0)
            fail("brake balance must lie in [0, 1]");
        driveline.engine.validate();
        if (!bypass_actuators) {
            for (const ActuatorTiming* a :
                 {&driveline.steer_act, &driveline.throttle_act, &driveline.brake_act}) {
                if (a->tau_s <= 0.0) fail("actuator time constants must be positive");
                if (a->dead_s < 0.0) fail("actuator dead times must be non-negative");
            }
        }
        if (v_low_mps <= 0.0) fail("low-speed guard must be positive");
        if (zero_track_width && (chassis.bf_m != 0.0 || chassis.br_m != 0.0))
            fail("zero-track flag set but track widths are nonzero");
        if (zero_cog_height &&
            (chassis.h_cog_m != 0.0 || chassis.h_rp_m != 0.0 ||
             chassis.h_pp_accel_m != 0.0 || chassis.h_pp_decel_m != 0.0))
            fail("zero-height flag set but lever heights are nonzero");
    }
};

// Shear force of the active tire fidelity, in the tire frame.
inline TireForces tire_shear(const SlipState& slip, const TireSetup& t) {
    switch (t.fidelity) {
        case TireFidelity::full:
            return mf2006_forces(slip, t.full);
        case TireFidelity::simple:
            return mf_simple_forces(slip, t.simple);
        case TireFidelity::linear:
            return linear_tire_forces(slip, t.linear);
    }
    throw ConfigError("unknown tire fidelity");
}

// Vertical tire loads implied by the wheel heave states.
inline std::array<double, 4> wheel_vertical_loads(const VehicleState& x,
                                                  const VehicleParameters& p) {
    const auto stat = static_wheel_loads(p.chassis);
    std::array<double, 4> fz;
    for (int i = 0; i < 4; ++i) {
        const double rho0 = stat[i] / p.tire.vertical_rate_npm;
        fz[i] = vertical_tire_force(rho0 - x[sx::wheel_heave + i], p.tire.vertical_rate_npm);
    }
    return fz;
}

// Interior quantities of one derivative evaluation, for logging and sensing.
struct ModelOutputs {
    std::array<double, 4> wheel_load_n{};
    std::array<double, 4> tire_fx_body_n{};
    std::array<double, 4> tire_fy_body_n{};
    double ax_mps2 = 0.0;
    double ay_mps2 = 0.0;
};

namespace vehicle_detail {

inline std::string state_snapshot(const VehicleState& x) {
    std::ostringstream os;
    os << " | state: vx=" << x[sx::vx] << " vy=" << x[sx::vy]
       << " yaw_rate=" << x[sx::yaw_rate] << " x=" << x[sx::x] << " y=" << x[sx::y]
       << " steer=" << x[sx::steer];
    return os.str();
}

inline VehicleState derivatives_impl(const VehicleState& x, const ActuationCommand& u,
                                     const Wrench& external, const VehicleParameters& p,
                                     ModelOutputs* outputs = nullptr) {
    const auto pos = wheel_positions(p.chassis);
    const auto stat = static_wheel_loads(p.chassis);
    const double vx = x[sx::vx];
    const double vy = x[sx::vy];
    const double r = x[sx::yaw_rate];

    const double steer = p.bypass_actuators ? u.steer_rad : x[sx::steer];
    const double thr = p.bypass_actuators ? u.throttle : x[sx::throttle];
    const double brk = p.bypass_actuators ? u.brake_pressure : x[sx::brake];
    const int n_gears = static_cast<int>(p.driveline.gear_ratio.size());
    const int gear = std::clamp(u.gear, 0, n_gears - 1);

    // Tire kinematics and shear, wheel by wheel. Slip enters the force model
    // through the first-order relaxation states, not the steady values.
    std::array<double, 4> fz, f_tire_x, f_tire_y, fx_body, fy_body;
    std::array<double, 4> alpha_ss, kappa_ss, v_roll;
    for (int i = 0; i < 4; ++i) {
        const double rho0 = stat[i] / p.tire.vertical_rate_npm;
        fz[i] = vertical_tire_force(rho0 - x[sx::wheel_heave + i], p.tire.vertical_rate_npm);

        const double vcx = vx - r * pos[i].y_m;
        const double vcy = vy + r * pos[i].x_m;
        const double delta = (i == FL || i == FR) ? steer : 0.0;
        const double cd = std::cos(delta);
        const double sd = std::sin(delta);
        const double vtx = cd * vcx + sd * vcy;
        const double vty = -sd * vcx + cd * vcy;
        const double denom = std::max(std::abs(vtx), p.v_low_mps);
        alpha_ss[i] = -std::atan(vty / denom);
        kappa_ss[i] =
            (x[sx::wheel_spin + i] * p.driveline.wheel_radius_m - vtx) / denom;
        v_roll[i] = vtx;

        const SlipState slip{x[sx::slip_ratio_lag + i], x[sx::slip_angle_lag + i],
                             0.0, fz[i]};
        const TireForces tf = tire_shear(slip, p.tire);
        f_tire_x[i] = tf.fx_n;
        f_tire_y[i] = tf.fy_n;
        fx_body[i] = cd * tf.fx_n - sd * tf.fy_n;
        fy_body[i] = sd * tf.fx_n + cd * tf.fy_n;
    }

    // Squat/lift geometry forces; the printed per-wheel equations act on the
    // chassis, so the body-frame tire forces enter with reversed sign.
    const bool accelerating = (fx_body[RL] + fx_body[RR]) >= 0.0;
    const double h_pp = accelerating ? p.chassis.h_pp_accel_m : p.chassis.h_pp_decel_m;
    const auto fa = axle_geometry_forces(
        {-fx_body[FL], -fx_body[FR], -fx_body[RL], -fx_body[RR]},
        {-fy_body[FL], -fy_body[FR], -fy_body[RL], -fy_body[RR]}, p.chassis.h_rp_m, h_pp,
        p.chassis.bf_m, p.chassis.br_m, p.chassis.lf_m, p.chassis.lr_m);

    const auto arb_f = arb_forces(x[sx::wheel_heave + FL], x[sx::wheel_heave + FR],
                                  p.chassis.k_arb_front_npm, p.chassis.bf_m);
    const auto arb_r = arb_forces(x[sx::wheel_heave + RL], x[sx::wheel_heave + RR],
                                  p.chassis.k_arb_rear_npm, p.chassis.br_m);
    const std::array<double, 4> f_arb{arb_f[0], arb_f[1], arb_r[0], arb_r[1]};

    // Suspension travel relative to the body mounting points (small-angle
    // roll/pitch levers), preload included via the static spring compression.
    std::array<double, 4> f_comp;
    for (int i = 0; i < 4; ++i) {
        const double mount = x[sx::heave] + pos[i].y_m * x[sx::roll] - pos[i].x_m * x[sx::pitch];
        const double mount_rate =
            x[sx::heave_rate] + pos[i].y_m * x[sx::roll_rate] - pos[i].x_m * x[sx::pitch_rate];
        const double preload = (stat[i] - p.chassis.m_unsprung_kg[i] * kGravity) /
                               p.chassis.k_spring_npm[i];
        const double travel = preload + x[sx::wheel_heave + i] - mount;
        const double travel_rate = x[sx::wheel_heave_rate + i] - mount_rate;
        f_comp[i] = spring_force(travel, p.chassis.k_spring_npm[i]) +
                    damper_force(travel_rate, p.chassis.k_damper_nspm[i]) + f_arb[i] + fa[i];
    }

    const AeroWrench aero = aero_wrench(vx, p.aero);

    BodyForceInputs body_in;
    body_in.f_comp_n = f_comp;
    body_in.fx_tire_n = fx_body;
    body_in.fy_tire_n = fy_body;
    body_in.fx_extra_n = aero.fx_n + external.fx_n;
    body_in.fy_extra_n = external.fy_n;
    body_in.fz_extra_n = aero.fz_n + external.fz_n;
    body_in.mx_extra_nm = external.mx_nm;
    body_in.my_extra_nm = aero.my_nm + external.my_nm;
    body_in.mz_extra_nm = external.mz_nm;
    const BodyAccel acc = body_derivatives(vx, vy, r, body_in, p.chassis);

    if (outputs) {
        outputs->wheel_load_n = fz;
        outputs->tire_fx_body_n = fx_body;
        outputs->tire_fy_body_n = fy_body;
        outputs->ax_mps2 = acc.ax_mps2;
        outputs->ay_mps2 = acc.ay_mps2;
    }

    // Driveline: the engine sees the spool-coupled rear axle speed.
    const double rear_speed = x[sx::wheel_spin + RL] * p.driveline.wheel_radius_m;
    const double rpm = p.driveline.rpm_at(rear_speed, gear);
    const double drive_torque =
        engine_torque(rpm, thr, p.driveline.engine) * p.driveline.gear_ratio[gear];
    const BrakeTorques brakes = brake_torques(brk, p.driveline);
    const std::array<double, 4> omega{x[sx::wheel_spin + FL], x[sx::wheel_spin + FR],
                                      x[sx::wheel_spin + RL], x[sx::wheel_spin + RR]};
    const auto spin_acc = wheel_spin_derivatives(omega, f_tire_x, drive_torque, brakes,
                                                 p.driveline);

    VehicleState d{};
    const double cpsi = std::cos(x[sx::yaw]);
    const double spsi = std::sin(x[sx::yaw]);
    d[sx::x] = vx * cpsi - vy * spsi;
    d[sx::y] = vx * spsi + vy * cpsi;
    d[sx::yaw] = r;
    d[sx::heave] = x[sx::heave_rate];
    d[sx::roll] = x[sx::roll_rate];
    d[sx::pitch] = x[sx::pitch_rate];
    d[sx::vx] = acc.ax_mps2;
    d[sx::vy] = acc.ay_mps2;
    d[sx::yaw_rate] = acc.dr_radps2;
    d[sx::heave_rate] = acc.az_mps2;
    d[sx::roll_rate] = acc.dp_radps2;
    d[sx::pitch_rate] = acc.dq_radps2;
    for (int i = 0; i < 4; ++i) {
        d[sx::wheel_heave + i] = x[sx::wheel_heave_rate + i];
        d[sx::wheel_heave_rate + i] =
            (fz[i] - f_comp[i] - p.chassis.m_unsprung_kg[i] * kGravity) /
            p.chassis.m_unsprung_kg[i];
        d[sx::wheel_spin + i] = spin_acc[i];
        d[sx::slip_angle_lag + i] = tire_lag_derivative(
            x[sx::slip_angle_lag + i], alpha_ss[i], v_roll[i], p.tire.sigma_alpha_m);
        d[sx::slip_ratio_lag + i] = tire_lag_derivative(
            x[sx::slip_ratio_lag + i], kappa_ss[i], v_roll[i], p.tire.sigma_kappa_m);
    }
    if (p.bypass_actuators) {
        d[sx::steer] = 0.0;
        d[sx::throttle] = 0.0;
        d[sx::brake] = 0.0;
    } else {
        d[sx::steer] = (u.steer_rad - x[sx::steer]) / p.driveline.steer_act.tau_s;
        d[sx::throttle] = (u.throttle - x[sx::throttle]) / p.driveline.throttle_act.tau_s;
        d[sx::brake] = (u.brake_pressure - x[sx::brake]) / p.driveline.brake_act.tau_s;
    }
    return d;
}

}  // namespace vehicle_detail

// The state equation. Pure in (x, u, external, p); submodule faults are
// re-thrown with a snapshot of the offending state appended.
inline VehicleState vehicle_derivatives(const VehicleState& x, const ActuationCommand& u,
                                        const Wrench& external, const VehicleParameters& p) {
    try {
        return vehicle_detail::derivatives_impl(x, u, external, p);
    } catch (const SimError& e) {
        throw SimError(std::string(e.what()) + vehicle_detail::state_snapshot(x));
    }
}

// Diagnostic evaluation alongside the derivative (same code path).
inline ModelOutputs model_outputs(const VehicleState& x, const ActuationCommand& u,
                                  const Wrench& external, const VehicleParameters& p) {
    ModelOutputs out;
    try {
        vehicle_detail::derivatives_impl(x, u, external, p, &out);
    } catch (const SimError& e) {
        throw SimError(std::string(e.what()) + vehicle_detail::state_snapshot(x));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model variants

enum class ModelVariant {
    base,
    mf_simple,
    linear_tires,
    cog0,
    single_track_cog0,
    no_delay,
    less_grip,
    less_lift,
};

inline const char* variant_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::base: return "base";
        case ModelVariant::mf_simple: return "mf_simple";
        case ModelVariant::linear_tires: return "linear_tires";
        case ModelVariant::cog0: return "cog0";
        case ModelVariant::single_track_cog0: return "single_track_cog0";
        case ModelVariant::no_delay: return "no_delay";
        case ModelVariant::less_grip: return "less_grip";
        case ModelVariant::less_lift: return "less_lift";
    }
    throw ConfigError("unknown model variant");
}

inline ModelVariant variant_from_name(const std::string& name) {
    for (ModelVariant v :
         {ModelVariant::base, ModelVariant::mf_simple, ModelVariant::linear_tires,
          ModelVariant::cog0, ModelVariant::single_track_cog0, ModelVariant::no_delay,
          ModelVariant::less_grip, ModelVariant::less_lift}) {
        if (name == variant_name(v)) return v;
    }
    throw ConfigError("unknown model variant: " + name);
}

inline const std::array<ModelVariant, 8>& all_variants() {
    static const std::array<ModelVariant, 8> v{
        ModelVariant::base,         ModelVariant::mf_simple,
        ModelVariant::linear_tires, ModelVariant::cog0,
        ModelVariant::single_track_cog0, ModelVariant::no_delay,
        ModelVariant::less_grip,    ModelVariant::less_lift};
    return v;
}

// Derives a simplified model from the baseline parameter set. The tire fits
// are carried out at the cached fit load (median per-wheel load of a
// baseline reference run).
inline VehicleParameters make_variant(const VehicleParameters& base, ModelVariant v) {
    VehicleParameters p = base;
    switch (v) {
        case ModelVariant::base:
            break;
        case ModelVariant::mf_simple:
            p.tire.fidelity = TireFidelity::simple;
            p.tire.simple = fit_simple_from_full(base.tire.full, base.tire.fit_load_n);
            break;
        case ModelVariant::linear_tires:
            p.tire.fidelity = TireFidelity::linear;
            p.tire.linear = linearize_full(base.tire.full, base.tire.fit_load_n);
            break;
        case ModelVariant::single_track_cog0:
            p.chassis.bf_m = 0.0;
            p.chassis.br_m = 0.0;
            p.zero_track_width = true;
            [[fallthrough]];
        case ModelVariant::cog0:
            p.chassis.h_cog_m = 0.0;
            p.chassis.h_rp_m = 0.0;
            p.chassis.h_pp_accel_m = 0.0;
            p.chassis.h_pp_decel_m = 0.0;
            p.zero_cog_height = true;
            break;
        case ModelVariant::no_delay:
            p.bypass_actuators = true;
            break;
        case ModelVariant::less_grip:
            p.tire.full.scale.l_mux *= 0.9;
            p.tire.full.scale.l_muy *= 0.9;
            p.tire.full.scale.l_kxk *= 0.9;
            p.tire.full.scale.l_kya *= 0.9;
            break;
        case ModelVariant::less_lift:
            p.aero.lift_area_kgpm *= 0.9;
            break;
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Initialization

struct TrimPoint {
    VehicleState state{};
    ActuationCommand command{};
};

// Straight-driving equilibrium at the given pose and speed: suspension
// settled under weight plus downforce, rear slip and throttle balancing
// drag, front wheels rolling free. The derivative at the returned state
// with the returned command vanishes on a flat track.
inline TrimPoint initial_state(const VehicleParameters& p, double x_m, double y_m,
                               double yaw_rad, double speed_mps) {
    p.validate();
    if (speed_mps < 0.0) throw ConfigError("initialization speed must be non-negative");

    const ChassisParameters& c = p.chassis;
    const auto stat = static_wheel_loads(c);
    const AeroWrench aero = aero_wrench(speed_mps, p.aero);
    const double drag_n = -aero.fx_n;  // positive demand on the rear axle

    // Body equilibrium: vertical force and pitch moment fix the front/rear
    // composite suspension forces (left/right symmetric).
    const double wheelbase = c.lf_m + c.lr_m;
    const double sum_fc = c.m_sprung_kg * kGravity - aero.fz_n;
    const double pitch_mom = aero.my_nm - c.h_cog_m * drag_n;
    const double fc_front = (sum_fc * c.lr_m + pitch_mom) / (2.0 * wheelbase);
    const double fc_rear = (sum_fc * c.lf_m - pitch_mom) / (2.0 * wheelbase);

    const auto fa = axle_geometry_forces({0.0, 0.0, -0.5 * drag_n, -0.5 * drag_n},
                                         {0.0, 0.0, 0.0, 0.0}, c.h_rp_m, c.h_pp_accel_m,
                                         c.bf_m, c.br_m, c.lf_m, c.lr_m);

    VehicleState x{};
    x[sx::x] = x_m;
    x[sx::y] = y_m;
    x[sx::yaw] = yaw_rad;
    x[sx::vx] = speed_mps;

    std::array<double, 4> mount;
    std::array<double, 4> fz;
    for (int i = 0; i < 4; ++i) {
        const double fc = (i == FL || i == FR) ? fc_front : fc_rear;
        fz[i] = fc + c.m_unsprung_kg[i] * kGravity;
        if (fz[i] <= 0.0)
            throw ConfigError("no equilibrium: wheel load vanishes at speed " +
                              std::to_string(speed_mps));
        x[sx::wheel_heave + i] = (stat[i] - fz[i]) / p.tire.vertical_rate_npm;

        const double preload = (stat[i] - c.m_unsprung_kg[i] * kGravity) / c.k_spring_npm[i];
        const double travel_needed = (fc - fa[i]) / c.k_spring_npm[i];
        if (std::abs(travel_needed - preload) > c.travel_limit_m)
            throw ConfigError("no equilibrium within suspension travel at speed " +
                              std::to_string(speed_mps));
        mount[i] = x[sx::wheel_heave + i] + preload - travel_needed;
    }
    // mount = heave - x_i * pitch per axle; solve the two-point lever.
    const double theta = (mount[RL] - mount[FL]) / wheelbase;
    x[sx::pitch] = theta;
    x[sx::heave] = mount[FL] + c.lf_m * theta;

    // Rear slip ratio producing half the drag per tire at the settled load.
    const double denom = std::max(speed_mps, p.v_low_mps);
    double kappa_rear = 0.0;
    if (drag_n > 0.0) {
        const double target = 0.5 * drag_n;
        const auto fx_at = [&](double kappa) {
            return tire_shear({kappa, 0.0, 0.0, fz[RL]}, p.tire).fx_n;
        };
        double hi = 0.0;
        const double step = 0.002;
        while (hi < 0.5 && fx_at(hi) < target) hi += step;
        if (hi >= 0.5)
            throw ConfigError("no equilibrium: drag exceeds drive capability at speed " +
                              std::to_string(speed_mps));
        double lo = std::max(0.0, hi - step);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (fx_at(mid) < target ? lo : hi) = mid;
        }
        kappa_rear = 0.5 * (lo + hi);
    }

    const double r_wheel = p.driveline.wheel_radius_m;
    x[sx::wheel_spin + FL] = speed_mps / r_wheel;
    x[sx::wheel_spin + FR] = speed_mps / r_wheel;
    const double omega_rear = (speed_mps + kappa_rear * denom) / r_wheel;
    x[sx::wheel_spin + RL] = omega_rear;
    x[sx::wheel_spin + RR] = omega_rear;
    x[sx::slip_ratio_lag + RL] = kappa_rear;
    x[sx::slip_ratio_lag + RR] = kappa_rear;

    // Throttle holding the drive torque that balances both rear tires.
    const int gear = gear_for_speed(speed_mps, p.driveline);
    const double rpm = p.driveline.rpm_at(omega_rear * r_wheel, gear);
    const double torque_needed = drag_n * r_wheel / p.driveline.gear_ratio[gear];
    const double thr = p.driveline.engine.inverse_throttle(rpm, torque_needed);
    if (std::abs(engine_torque(rpm, thr, p.driveline.engine) - torque_needed) >
        1e-6 * std::max(1.0, std::abs(torque_needed)))
        throw ConfigError("no equilibrium: engine cannot hold speed " +
                          std::to_string(speed_mps));

    x[sx::throttle] = thr;

    TrimPoint trim;
    trim.state = x;
    trim.command = ActuationCommand{0.0, thr, 0.0, gear};
    return trim;
}

}  // namespace lapsim
