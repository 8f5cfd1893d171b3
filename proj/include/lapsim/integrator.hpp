#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lapsim/errors.hpp"

namespace lapsim {

// Fixed-step Dormand-Prince 5(4) integration.
//
// The classic 7-stage tableau is used, the fifth-order solution is
// propagated and the embedded fourth-order error estimate is discarded
// (step size is never adapted). The fifth-order weights do not touch the
// seventh stage, so each step costs exactly six derivative evaluations.
// Stage sums run in fixed tableau order so repeated runs are
// bit-reproducible.

template <std::size_t N>
using StateVec = std::array<double, N>;

namespace dp45 {

inline constexpr double c2 = 1.0 / 5.0;
inline constexpr double c3 = 3.0 / 10.0;
inline constexpr double c4 = 4.0 / 5.0;
inline constexpr double c5 = 8.0 / 9.0;
inline constexpr double c6 = 1.0;

inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                        a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;

// Fifth-order weights; b2 = b7 = 0.
inline constexpr double b1 = 35.0 / 384.0;
inline constexpr double b3 = 500.0 / 1113.0;
inline constexpr double b4 = 125.0 / 192.0;
inline constexpr double b5 = -2187.0 / 6784.0;
inline constexpr double b6 = 11.0 / 84.0;

template <std::size_t N>
inline void check_finite(const StateVec<N>& k, int stage) {
    for (double v : k) {
        if (!std::isfinite(v)) {
            throw IntegrationFault(
                stage, "non-finite derivative at stage " + std::to_string(stage));
        }
    }
}

}  // namespace dp45

// One fixed step of size h. f(x, u) must return d(x)/dt; u is held constant
// for the whole step (zero-order hold). Throws IntegrationFault carrying the
// 1-based stage index if any stage derivative is non-finite.
template <std::size_t N, class Input, class Deriv>
StateVec<N> dp45_step(Deriv&& f, const StateVec<N>& x, const Input& u, double h) {
    using namespace dp45;
    StateVec<N> xs;

    const StateVec<N> k1 = f(x, u);
    check_finite(k1, 1);

    for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + h * (a21 * k1[i]);
    const StateVec<N> k2 = f(xs, u);
    check_finite(k2, 2);

    for (std::size_t i = 0; i < N; ++i)
        xs[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
    const StateVec<N> k3 = f(xs, u);
    check_finite(k3, 3);

    for (std::size_t i = 0; i < N; ++i)
        xs[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    const StateVec<N> k4 = f(xs, u);
    check_finite(k4, 4);

    for (std::size_t i = 0; i < N; ++i)
        xs[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    const StateVec<N> k5 = f(xs, u);
    check_finite(k5, 5);

    for (std::size_t i = 0; i < N; ++i)
        xs[i] = x[i] +
                h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                     a65 * k5[i]);
    const StateVec<N> k6 = f(xs, u);
    check_finite(k6, 6);

    StateVec<N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = x[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                             b5 * k5[i] + b6 * k6[i]);
    return out;
}

template <std::size_t N>
struct TrajectorySample {
    double t;
    StateVec<N> x;
};

// Integrate from t = 0 to t_end with fixed step h; t_end must be an integer
// multiple of h (within 1 part in 1e9). The input schedule is evaluated once
// at the start of each step and held for the step. Returns samples at every
// step boundary, including t = 0.
template <std::size_t N, class Schedule, class Deriv>
std::vector<TrajectorySample<N>> integrate(Deriv&& f, const StateVec<N>& x0,
                                           Schedule&& input_schedule, double h,
                                           double t_end) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step size must be positive");
    const double steps_real = t_end / h;
    const long long n_steps = std::llround(steps_real);
    if (n_steps < 0 || std::abs(steps_real - static_cast<double>(n_steps)) >
                           1e-9 * std::max(1.0, std::abs(steps_real))) {
        throw ConfigError("t_end is not an integer multiple of the step size");
    }

    std::vector<TrajectorySample<N>> traj;
    traj.reserve(static_cast<std::size_t>(n_steps) + 1);
    StateVec<N> x = x0;
    traj.push_back({0.0, x});
    for (long long step = 0; step < n_steps; ++step) {
        const double t = static_cast<double>(step) * h;
        const auto u = input_schedule(t);
        x = dp45_step(f, x, u, h);
        traj.push_back({static_cast<double>(step + 1) * h, x});
    }
    return traj;
}

}  // namespace lapsim
