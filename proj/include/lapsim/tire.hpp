#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lapsim/errors.hpp"

namespace lapsim {

// Tire force models.
//
// Conventions: body-ish tire frame with x forward and y left; slip ratio
// kappa is positive when driving, slip angle alpha (rad) is positive when it
// produces a positive (leftward) lateral force, camber gamma in rad, load
// fz in N. All models return in-plane shear forces only; aligning moment and
// turn slip are out of scope. A non-positive load short-circuits to zero
// force in every fidelity (an airborne wheel transmits nothing).

struct SlipState {
    double kappa = 0.0;      // longitudinal slip ratio
    double alpha_rad = 0.0;  // lateral slip angle
    double gamma_rad = 0.0;  // camber angle
    double fz_n = 0.0;       // vertical load
};

struct TireForces {
    double fx_n = 0.0;
    double fy_n = 0.0;
};

// Scaling factors applied on top of the base coefficient set (grip, slip
// stiffness, shape, curvature, offsets, combined-slip weighting).
struct MFScaling {
    double l_fz0 = 1.0;  // nominal load
    double l_mux = 1.0;  // longitudinal grip
    double l_muy = 1.0;  // lateral grip
    double l_kxk = 1.0;  // longitudinal slip stiffness
    double l_kya = 1.0;  // cornering stiffness
    double l_cx = 1.0;   // longitudinal shape
    double l_cy = 1.0;   // lateral shape
    double l_ex = 1.0;   // longitudinal curvature
    double l_ey = 1.0;   // lateral curvature
    double l_hx = 1.0;   // longitudinal horizontal offset
    double l_hy = 1.0;   // lateral horizontal offset
    double l_vx = 1.0;   // longitudinal vertical offset
    double l_vy = 1.0;   // lateral vertical offset
    double l_kyg = 1.0;  // camber stiffness
    double l_xa = 1.0;   // combined-slip weighting on Fx
    double l_yk = 1.0;   // combined-slip weighting on Fy
    double l_vyk = 1.0;  // combined-slip induced ply force
};

// Magic Formula coefficient set (2006 book forms), pure-slip longitudinal
// and lateral plus the cosine-weighted combined-slip interaction.
struct MF2006Parameters {
    double fz0_n = 3000.0;  // nominal load

    // Longitudinal pure slip.
    double p_cx1 = 1.6;
    double p_dx1 = 1.2, p_dx2 = -0.05, p_dx3 = 0.0;
    double p_ex1 = 0.3, p_ex2 = 0.0, p_ex3 = 0.0, p_ex4 = 0.0;
    double p_kx1 = 25.0, p_kx2 = 0.0, p_kx3 = 0.0;
    double p_hx1 = 0.0, p_hx2 = 0.0;
    double p_vx1 = 0.0, p_vx2 = 0.0;

    // Longitudinal combined slip.
    double r_bx1 = 12.0, r_bx2 = 10.0, r_bx3 = 0.0;
    double r_cx1 = 1.0;
    double r_ex1 = 0.0, r_ex2 = 0.0;
    double r_hx1 = 0.0;

    // Lateral pure slip.
    double p_cy1 = 1.3;
    double p_dy1 = 1.1, p_dy2 = -0.05, p_dy3 = 0.0;
    double p_ey1 = -0.3, p_ey2 = 0.0, p_ey3 = 0.0, p_ey4 = 0.0, p_ey5 = 0.0;
    double p_ky1 = 20.0, p_ky2 = 1.8, p_ky3 = 0.0, p_ky4 = 2.0, p_ky5 = 0.0;
    double p_ky6 = 0.0, p_ky7 = 0.0;
    double p_hy1 = 0.0, p_hy2 = 0.0;
    double p_vy1 = 0.0, p_vy2 = 0.0, p_vy3 = 0.0, p_vy4 = 0.0;

    // Lateral combined slip.
    double r_by1 = 10.0, r_by2 = 8.0, r_by3 = 0.0, r_by4 = 0.0;
    double r_cy1 = 1.0;
    double r_ey1 = 0.0, r_ey2 = 0.0;
    double r_hy1 = 0.0, r_hy2 = 0.0;
    double r_vy1 = 0.0, r_vy2 = 0.0, r_vy3 = 0.0, r_vy4 = 0.0, r_vy5 = 0.0,
           r_vy6 = 0.0;

    MFScaling scale;
};

// One axis of the four-coefficient basic formula.
struct MFSimpleAxis {
    double b = 10.0;
    double c = 1.5;
    double d = 3000.0;
    double e = 0.5;
};

struct MFSimpleParameters {
    MFSimpleAxis lon;  // force vs slip ratio
    MFSimpleAxis lat;  // force vs slip angle
};

struct LinearTireParameters {
    double c_kappa_n = 60000.0;       // N per unit slip ratio
    double c_alpha_n_per_rad = 60000.0;  // N per rad
};

namespace mf_detail {

inline double sgn(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// y(x) = D sin(C atan(Bx - E(Bx - atan(Bx))))
inline double basic(double b, double c, double d, double e, double x) {
    const double bx = b * x;
    return d * std::sin(c * std::atan(bx - e * (bx - std::atan(bx))));
}

inline double guarded_div(double num, double den) {
    const double eps = 1e-9;
    return num / (den + (den >= 0.0 ? eps : -eps));
}

struct LonBlocks {
    double shx, svx, cx, mux, dx, ex, kxk, bx, fx0;
};

struct LatBlocks {
    double kya, kyg0, svyg, svy, shy, cy, muy, dy, ey, by, fy0;
};

inline LonBlocks lon_pure(const MF2006Parameters& p, double kappa, double gs,
                          double fz, double dfz) {
    const MFScaling& s = p.scale;
    LonBlocks o;
    o.shx = (p.p_hx1 + p.p_hx2 * dfz) * s.l_hx;
    o.svx = fz * (p.p_vx1 + p.p_vx2 * dfz) * s.l_vx * s.l_mux;
    const double kx = kappa + o.shx;
    o.cx = p.p_cx1 * s.l_cx;
    o.mux = (p.p_dx1 + p.p_dx2 * dfz) * (1.0 - p.p_dx3 * gs * gs) * s.l_mux;
    o.dx = o.mux * fz;
    o.ex = std::min(1.0, (p.p_ex1 + p.p_ex2 * dfz + p.p_ex3 * dfz * dfz) *
                             (1.0 - p.p_ex4 * sgn(kx)) * s.l_ex);
    o.kxk = fz * (p.p_kx1 + p.p_kx2 * dfz) * std::exp(p.p_kx3 * dfz) * s.l_kxk;
    o.bx = guarded_div(o.kxk, o.cx * o.dx);
    o.fx0 = basic(o.bx, o.cx, o.dx, o.ex, kx) + o.svx;
    return o;
}

inline LatBlocks lat_pure(const MF2006Parameters& p, double alpha, double gs,
                          double fz, double dfz) {
    const MFScaling& s = p.scale;
    const double fz0p = p.fz0_n * s.l_fz0;
    LatBlocks o;
    o.kya = p.p_ky1 * fz0p *
            std::sin(p.p_ky4 *
                     std::atan(fz / ((p.p_ky2 + p.p_ky5 * gs * gs) * fz0p))) *
            (1.0 - p.p_ky3 * std::abs(gs)) * s.l_kya;
    o.kyg0 = fz * (p.p_ky6 + p.p_ky7 * dfz) * s.l_kyg;
    o.svyg = fz * (p.p_vy3 + p.p_vy4 * dfz) * gs * s.l_kyg * s.l_muy;
    o.svy = fz * (p.p_vy1 + p.p_vy2 * dfz) * s.l_vy * s.l_muy + o.svyg;
    o.shy = (p.p_hy1 + p.p_hy2 * dfz) * s.l_hy +
            guarded_div(o.kyg0 * gs - o.svyg, o.kya);
    const double ay = alpha + o.shy;
    o.cy = p.p_cy1 * s.l_cy;
    o.muy = (p.p_dy1 + p.p_dy2 * dfz) * (1.0 - p.p_dy3 * gs * gs) * s.l_muy;
    o.dy = o.muy * fz;
    o.ey = std::min(1.0, (p.p_ey1 + p.p_ey2 * dfz) *
                             (1.0 + p.p_ey5 * gs * gs -
                              (p.p_ey3 + p.p_ey4 * gs) * sgn(ay)) *
                             s.l_ey);
    o.by = guarded_div(o.kya, o.cy * o.dy);
    o.fy0 = basic(o.by, o.cy, o.dy, o.ey, ay) + o.svy;
    return o;
}

// cos(C atan(Bx - E(Bx - atan Bx))) building block of the combined weights.
inline double cos_shape(double b, double c, double e, double x) {
    const double bx = b * x;
    return std::cos(c * std::atan(bx - e * (bx - std::atan(bx))));
}

[[noreturn]] inline void fault(const std::string& name) {
    throw TireModelFault("non-finite tire intermediate: " + name);
}

}  // namespace mf_detail

// Full Magic Formula evaluation (pure slip shapes plus cosine-weighted
// combined-slip interaction). Throws TireModelFault naming the first
// non-finite intermediate block if the parameter set is degenerate.
inline TireForces mf2006_forces(const SlipState& slip, const MF2006Parameters& p) {
    using namespace mf_detail;
    if (!(slip.fz_n > 0.0)) return {0.0, 0.0};

    const MFScaling& s = p.scale;
    const double fz = slip.fz_n;
    const double fz0p = p.fz0_n * s.l_fz0;
    const double dfz = (fz - fz0p) / fz0p;
    const double gs = std::sin(slip.gamma_rad);
    const double alpha = slip.alpha_rad;
    const double kappa = slip.kappa;

    const LonBlocks lx = lon_pure(p, kappa, gs, fz, dfz);
    const LatBlocks ly = lat_pure(p, alpha, gs, fz, dfz);

    // Combined slip: Fx weighted over alpha.
    const double bxa =
        (p.r_bx1 + p.r_bx3 * gs * gs) * std::cos(std::atan(p.r_bx2 * kappa)) * s.l_xa;
    const double cxa = p.r_cx1;
    const double exa = std::min(1.0, p.r_ex1 + p.r_ex2 * dfz);
    const double shxa = p.r_hx1;
    const double gxa0 = cos_shape(bxa, cxa, exa, shxa);
    const double gxa = cos_shape(bxa, cxa, exa, alpha + shxa) / gxa0;

    // Combined slip: Fy weighted over kappa plus induced ply force.
    const double byk = (p.r_by1 + p.r_by4 * gs * gs) *
                       std::cos(std::atan(p.r_by2 * (alpha - p.r_by3))) * s.l_yk;
    const double cyk = p.r_cy1;
    const double eyk = std::min(1.0, p.r_ey1 + p.r_ey2 * dfz);
    const double shyk = p.r_hy1 + p.r_hy2 * dfz;
    const double dvyk = ly.muy * fz * (p.r_vy1 + p.r_vy2 * dfz + p.r_vy3 * gs) *
                        std::cos(std::atan(p.r_vy4 * alpha));
    const double svyk = dvyk * std::sin(p.r_vy5 * std::atan(p.r_vy6 * kappa)) * s.l_vyk;
    const double gyk0 = cos_shape(byk, cyk, eyk, shyk);
    const double gyk = cos_shape(byk, cyk, eyk, kappa + shyk) / gyk0;

    TireForces out{gxa * lx.fx0, gyk * ly.fy0 + svyk};
    if (!std::isfinite(out.fx_n) || !std::isfinite(out.fy_n)) {
        if (!std::isfinite(dfz)) fault("dfz");
        if (!std::isfinite(lx.mux)) fault("mux");
        if (!std::isfinite(lx.kxk)) fault("Kxk");
        if (!std::isfinite(lx.bx)) fault("Bx");
        if (!std::isfinite(lx.ex)) fault("Ex");
        if (!std::isfinite(lx.fx0)) fault("Fx0");
        if (!std::isfinite(gxa)) fault("Gxa");
        if (!std::isfinite(ly.kya)) fault("Kya");
        if (!std::isfinite(ly.muy)) fault("muy");
        if (!std::isfinite(ly.by)) fault("By");
        if (!std::isfinite(ly.ey)) fault("Ey");
        if (!std::isfinite(ly.shy)) fault("SHy");
        if (!std::isfinite(ly.svy)) fault("SVy");
        if (!std::isfinite(ly.fy0)) fault("Fy0");
        if (!std::isfinite(gyk)) fault("Gyk");
        fault("Fx/Fy");
    }
    return out;
}

// Basic four-coefficient formula per axis; no load dependence, no
// combined-slip coupling.
inline TireForces mf_simple_forces(const SlipState& slip, const MFSimpleParameters& p) {
    if (!(slip.fz_n > 0.0)) return {0.0, 0.0};
    return {mf_detail::basic(p.lon.b, p.lon.c, p.lon.d, p.lon.e, slip.kappa),
            mf_detail::basic(p.lat.b, p.lat.c, p.lat.d, p.lat.e, slip.alpha_rad)};
}

// First-order (constant-stiffness) tire.
inline TireForces linear_tire_forces(const SlipState& slip,
                                     const LinearTireParameters& p) {
    if (!(slip.fz_n > 0.0)) return {0.0, 0.0};
    return {p.c_kappa_n * slip.kappa, p.c_alpha_n_per_rad * slip.alpha_rad};
}

// Vertical tire spring: force = rate * penetration, floored at zero
// (the tire cannot pull on the road).
inline double vertical_tire_force(double penetration_m, double rate_n_per_m) {
    return std::max(0.0, rate_n_per_m * penetration_m);
}

// First-order relaxation toward the steady slip quantity. The recovery rate
// |vx| / sigma is frozen at its 1 m/s value below 1 m/s so the lag stays
// well-conditioned at standstill.
inline double tire_lag_derivative(double lagged, double steady, double vx_mps,
                                  double sigma_m) {
    const double rate = std::max(std::abs(vx_mps), 1.0) / sigma_m;
    return rate * (steady - lagged);
}

namespace mf_detail {

// Peak of |f| on (0, hi], located by dense sweep plus golden-section
// refinement. Returns {argmax, max}.
template <class F>
inline std::pair<double, double> find_peak(F&& f, double hi, int sweep_steps) {
    double best_x = hi, best_y = std::abs(f(hi));
    const double dx = hi / sweep_steps;
    for (int i = 1; i <= sweep_steps; ++i) {
        const double x = i * dx;
        const double y = std::abs(f(x));
        if (y > best_y) {
            best_y = y;
            best_x = x;
        }
    }
    double lo = std::max(dx * 0.5, best_x - dx);
    double hiw = std::min(hi, best_x + dx);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hiw - gr * (hiw - lo), x2 = lo + gr * (hiw - lo);
    double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
    for (int it = 0; it < 200 && (hiw - lo) > 1e-13 * std::max(1.0, hiw); ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hiw - lo);
            f2 = std::abs(f(x2));
        } else {
            hiw = x2;
            x2 = x1;
            f2 = f1;
            x1 = hiw - gr * (hiw - lo);
            f1 = std::abs(f(x1));
        }
    }
    const double xm = 0.5 * (lo + hiw);
    return {xm, std::abs(f(xm))};
}

// Identify (B, C, D, E) of the basic formula from a full-model slice:
// D from the peak, B C D from the zero-slip stiffness, C from the asymptote
// level, E from the peak location.
template <class F>
inline MFSimpleAxis fit_axis(F&& f, double sweep_hi) {
    MFSimpleAxis out;

    const double h = 1e-5;
    const double k = (f(h) - f(-h)) / (2.0 * h);  // zero-slip stiffness

    const auto [xm, d] = find_peak(f, sweep_hi, 4000);
    out.d = d;

    const double y_inf = std::abs(f(1e8));  // atan saturates; exact asymptote level
    const double ratio = std::clamp(y_inf / d, -1.0, 1.0);
    if (ratio >= 1.0 - 1e-12) {
        // Monotone shape, no interior peak.
        out.c = 1.0;
        out.e = 0.0;
        out.b = k / (out.c * out.d);
        return out;
    }
    out.c = 2.0 - (2.0 / M_PI) * std::asin(ratio);
    out.b = k / (out.c * out.d);

    // Peak condition: B xm - E (B xm - atan(B xm)) = tan(pi / (2C)).
    const double bxm = out.b * xm;
    const double denom = bxm - std::atan(bxm);
    if (std::abs(denom) < 1e-12) {
        out.e = 0.0;
    } else {
        out.e = std::min(1.0, (bxm - std::tan(M_PI / (2.0 * out.c))) / denom);
    }
    return out;
}

}  // namespace mf_detail

// Identify basic-formula coefficients from the full model at a fixed load
// (zero camber, one slip axis at a time, the other axis at zero).
inline MFSimpleParameters fit_simple_from_full(const MF2006Parameters& full,
                                               double fz_fit_n) {
    if (!(fz_fit_n > 0.0) || !std::isfinite(fz_fit_n))
        throw ConfigError("tire fit load must be positive");
    auto f_lon = [&](double kappa) {
        return mf2006_forces({kappa, 0.0, 0.0, fz_fit_n}, full).fx_n;
    };
    auto f_lat = [&](double alpha) {
        return mf2006_forces({0.0, alpha, 0.0, fz_fit_n}, full).fy_n;
    };
    MFSimpleParameters out;
    out.lon = mf_detail::fit_axis(f_lon, 1.5);
    out.lat = mf_detail::fit_axis(f_lat, 1.2);
    return out;
}

// Zero-slip stiffnesses of the full model at a fixed load, central
// finite differences (used to derive the linear fidelity).
inline LinearTireParameters linearize_full(const MF2006Parameters& full,
                                           double fz_fit_n) {
    if (!(fz_fit_n > 0.0) || !std::isfinite(fz_fit_n))
        throw ConfigError("tire fit load must be positive");
    const double h = 1e-5;
    LinearTireParameters out;
    out.c_kappa_n = (mf2006_forces({h, 0.0, 0.0, fz_fit_n}, full).fx_n -
                     mf2006_forces({-h, 0.0, 0.0, fz_fit_n}, full).fx_n) /
                    (2.0 * h);
    out.c_alpha_n_per_rad =
        (mf2006_forces({0.0, h, 0.0, fz_fit_n}, full).fy_n -
         mf2006_forces({0.0, -h, 0.0, fz_fit_n}, full).fy_n) /
        (2.0 * h);
    return out;
}

}  // namespace lapsim
