#pragma once

#include <array>
#include <cmath>

#include "lapsim/constants.hpp"
#include "lapsim/errors.hpp"

namespace lapsim {

// Sprung-body and suspension force model.
//
// Body frame: x forward, y left, z up; roll about +x (positive raises the
// left side), pitch about +y (positive drops the nose), yaw about +z
// (positive turns left). Wheel order is fl, fr, rl, rr throughout.

enum Wheel : int { FL = 0, FR = 1, RL = 2, RR = 3 };

// Body-frame force/moment bundle, used for aero and road-surface effects.
struct Wrench {
    double fx_n = 0.0;
    double fy_n = 0.0;
    double fz_n = 0.0;
    double mx_nm = 0.0;
    double my_nm = 0.0;
    double mz_nm = 0.0;
};

struct ChassisParameters {
    double m_sprung_kg = 640.0;
    // Distributed so the axle shares match the CoG lever ratio; standing
    // equilibrium then reproduces the lever-balance wheel loads exactly.
    std::array<double, 4> m_unsprung_kg{18.0, 18.0, 22.0, 22.0};
    double ixx_kgm2 = 90.0;
    double iyy_kgm2 = 550.0;
    double izz_kgm2 = 600.0;
    double lf_m = 1.65;  // CoG to front axle
    double lr_m = 1.35;  // CoG to rear axle
    double bf_m = 1.60;  // front track width
    double br_m = 1.55;  // rear track width
    double h_cog_m = 0.28;
    double h_rp_m = 0.045;       // roll pivot height
    double h_pp_accel_m = 0.10;  // pitch pivot height while driving
    double h_pp_decel_m = 0.06;  // pitch pivot height while braking
    std::array<double, 4> k_spring_npm{140000.0, 140000.0, 160000.0, 160000.0};
    std::array<double, 4> k_damper_nspm{8000.0, 8000.0, 9000.0, 9000.0};
    double k_arb_front_npm = 50000.0;  // N per m of wheel heave difference
    double k_arb_rear_npm = 30000.0;
    double travel_limit_m = 0.08;  // admissible spring deflection about static

    double total_mass_kg() const {
        return m_sprung_kg + m_unsprung_kg[FL] + m_unsprung_kg[FR] +
               m_unsprung_kg[RL] + m_unsprung_kg[RR];
    }
};

struct WheelPosition {
    double x_m;
    double y_m;
};

inline std::array<WheelPosition, 4> wheel_positions(const ChassisParameters& p) {
    return {{{p.lf_m, 0.5 * p.bf_m},
             {p.lf_m, -0.5 * p.bf_m},
             {-p.lr_m, 0.5 * p.br_m},
             {-p.lr_m, -0.5 * p.br_m}}};
}

// Linear spring about its preloaded length; travel is compression-positive.
inline double spring_force(double travel_m, double rate_npm) {
    return travel_m * rate_npm;
}

// Linear damper; rate is compression-rate-positive.
inline double damper_force(double rate_mps, double coeff_nspm) {
    return rate_mps * coeff_nspm;
}

// Anti-roll bar couples the two wheel heaves of one axle:
// f_left = (z_right - z_left) * k, f_right = -f_left. Defined as zero for a
// degenerate zero-track-width axle.
inline std::array<double, 2> arb_forces(double z_left_m, double z_right_m,
                                        double k_arb_npm, double track_m) {
    if (track_m <= 0.0) return {0.0, 0.0};
    const double f_left = (z_right_m - z_left_m) * k_arb_npm;
    return {f_left, -f_left};
}

// Squat/lift forces transmitted through the suspension linkage pivots:
//   fa_fl =  2 fy_fl h_rp / b_f + fx_fl h_pp / l_f
//   fa_fr = -2 fy_fr h_rp / b_f + fx_fr h_pp / l_f
//   fa_rl =  2 fy_rl h_rp / b_r - fx_rl h_pp / l_r
//   fa_rr = -2 fy_rr h_rp / b_r - fx_rr h_pp / l_r
// The lateral terms are defined as zero for a zero-track-width axle.
inline std::array<double, 4> axle_geometry_forces(
    const std::array<double, 4>& fx_n, const std::array<double, 4>& fy_n,
    double h_rp_m, double h_pp_m, double bf_m, double br_m, double lf_m,
    double lr_m) {
    const double lat_f = bf_m > 0.0 ? 2.0 * h_rp_m / bf_m : 0.0;
    const double lat_r = br_m > 0.0 ? 2.0 * h_rp_m / br_m : 0.0;
    return {fy_n[FL] * lat_f + fx_n[FL] * h_pp_m / lf_m,
            -fy_n[FR] * lat_f + fx_n[FR] * h_pp_m / lf_m,
            fy_n[RL] * lat_r - fx_n[RL] * h_pp_m / lr_m,
            -fy_n[RR] * lat_r - fx_n[RR] * h_pp_m / lr_m};
}

// Static per-wheel loads on level ground at rest: axle split by the CoG
// position, left/right split evenly.
inline std::array<double, 4> static_wheel_loads(const ChassisParameters& p) {
    const double w = p.total_mass_kg() * kGravity;
    const double wheelbase = p.lf_m + p.lr_m;
    if (!(wheelbase > 0.0)) throw ConfigError("wheelbase must be positive");
    const double front_axle = w * p.lr_m / wheelbase;
    const double rear_axle = w * p.lf_m / wheelbase;
    return {0.5 * front_axle, 0.5 * front_axle, 0.5 * rear_axle,
            0.5 * rear_axle};
}

// Force/moment inputs for the six body accelerations. Suspension forces are
// up-positive on the body at the wheel stations; tire shear forces are
// body-frame forces at the contact patches (they act a CoG height below the
// body, which is where the roll/pitch levers come from); the extra channels
// collect aero and the external road wrench acting at the CoG.
struct BodyForceInputs {
    std::array<double, 4> f_comp_n{};   // composite suspension per wheel
    std::array<double, 4> fx_tire_n{};  // body-frame tire shear
    std::array<double, 4> fy_tire_n{};
    double fx_extra_n = 0.0;
    double fy_extra_n = 0.0;
    double fz_extra_n = 0.0;
    double mx_extra_nm = 0.0;
    double my_extra_nm = 0.0;
    double mz_extra_nm = 0.0;
};

struct BodyAccel {
    double ax_mps2 = 0.0;  // body-frame surge (with yaw-rate coupling)
    double ay_mps2 = 0.0;  // body-frame sway
    double az_mps2 = 0.0;  // sprung-mass heave
    double dp_radps2 = 0.0;
    double dq_radps2 = 0.0;
    double dr_radps2 = 0.0;
};

// Newton-Euler balance with a diagonal inertia tensor and small roll/pitch
// angles. Horizontal translation carries the total mass (the unsprung masses
// translate with the body); heave carries the sprung mass only (the wheels
// have their own vertical states). Gravity on the sprung mass is included
// here; the suspension preload carries it at equilibrium.
inline BodyAccel body_derivatives(double vx_mps, double vy_mps,
                                  double yaw_rate_radps,
                                  const BodyForceInputs& in,
                                  const ChassisParameters& p) {
    const auto pos = wheel_positions(p);
    const double m_total = p.total_mass_kg();

    double sum_fc = 0.0, sum_fx = 0.0, sum_fy = 0.0;
    double mx = in.mx_extra_nm, my = in.my_extra_nm, mz = in.mz_extra_nm;
    for (int i = 0; i < 4; ++i) {
        sum_fc += in.f_comp_n[i];
        sum_fx += in.fx_tire_n[i];
        sum_fy += in.fy_tire_n[i];
        mx += pos[i].y_m * in.f_comp_n[i];
        my += -pos[i].x_m * in.f_comp_n[i];
        mz += pos[i].x_m * in.fy_tire_n[i] - pos[i].y_m * in.fx_tire_n[i];
    }
    // Tire shear acts at ground level, a CoG height below the body.
    mx += p.h_cog_m * sum_fy;
    my += -p.h_cog_m * sum_fx;

    BodyAccel a;
    a.ax_mps2 = (sum_fx + in.fx_extra_n) / m_total + yaw_rate_radps * vy_mps;
    a.ay_mps2 = (sum_fy + in.fy_extra_n) / m_total - yaw_rate_radps * vx_mps;
    a.az_mps2 = (sum_fc - p.m_sprung_kg * kGravity + in.fz_extra_n) / p.m_sprung_kg;
    a.dp_radps2 = mx / p.ixx_kgm2;
    a.dq_radps2 = my / p.iyy_kgm2;
    a.dr_radps2 = mz / p.izz_kgm2;
    return a;
}

}  // namespace lapsim
