#pragma once

#include <cmath>

namespace lapsim {

// Quadratic single-point aerodynamic model: drag along body x, lift along
// body z (negative coefficient = downforce), and a pitch moment that shifts
// the aero load between the axles. No side force, no wind.
struct AeroParameters {
    double drag_area_kgpm = 0.55;   // (1/2) rho c_d A
    double lift_area_kgpm = -2.10;  // (1/2) rho c_l A, negative lifts down
    double lever_m = 0.0;           // pitch lever of the lift force
};

struct AeroWrench {
    double fx_n = 0.0;   // drag, opposes longitudinal motion
    double fz_n = 0.0;   // lift (negative = downforce)
    double my_nm = 0.0;  // pitch moment = fz * lever
};

inline AeroWrench aero_wrench(double vx_mps, const AeroParameters& p) {
    AeroWrench w;
    w.fx_n = -p.drag_area_kgpm * vx_mps * std::abs(vx_mps);
    w.fz_n = p.lift_area_kgpm * vx_mps * vx_mps;
    w.my_nm = w.fz_n * p.lever_m;
    return w;
}

}  // namespace lapsim
