#pragma once

#include <cstddef>
#include <vector>

#include "lapsim/vehicle.hpp"

namespace lapsim {

// Canonical ~720 kg race car used by the shipped data files and the test
// suite. Everything except the engine table and gearing comes from the
// struct defaults in vehicle.hpp.

inline EngineMap reference_engine_map() {
    EngineMap m;
    m.rpm = {1000.0, 3000.0, 5000.0, 7000.0, 9000.0, 11000.0, 12000.0};
    m.throttle = {0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> braking = {-8.0, -14.0, -20.0, -26.0, -32.0, -38.0, -41.0};
    const std::vector<double> full = {320.0, 400.0, 440.0, 450.0, 430.0, 390.0, 360.0};
    m.torque_nm.resize(m.rpm.size());
    for (std::size_t i = 0; i < m.rpm.size(); ++i) {
        m.torque_nm[i].resize(m.throttle.size());
        for (std::size_t j = 0; j < m.throttle.size(); ++j)
            m.torque_nm[i][j] = braking[i] + m.throttle[j] * (full[i] - braking[i]);
    }
    return m;
}

inline VehicleParameters reference_vehicle() {
    VehicleParameters p;
    p.driveline.engine = reference_engine_map();
    p.driveline.gear_ratio = {14.0, 10.5, 8.4, 7.0, 5.9, 5.0, 4.3};
    // Median per-wheel vertical load of this car driving the shipped road
    // course lap; the simplified tire variants are fit at this load.
    p.tire.fit_load_n = 2192.0;
    return p;
}

}  // namespace lapsim
