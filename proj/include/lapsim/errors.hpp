#pragma once

#include <stdexcept>
#include <string>

namespace lapsim {

// Base for every fault this library raises. Batch runners catch SimError
// subclasses and record the affected run as failed; configuration errors
// are expected to propagate out of the CLI as a nonzero exit.
class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration / parameter input.
class ConfigError : public SimError {
public:
    using SimError::SimError;
};

// Non-finite derivative during a Runge-Kutta step; stage is 1-based.
class IntegrationFault : public SimError {
public:
    IntegrationFault(int stage_index, const std::string& what)
        : SimError(what), stage(stage_index) {}
    int stage;
};

// Non-finite intermediate inside a tire force evaluation; names the
// first offending coefficient block.
class TireModelFault : public SimError {
public:
    using SimError::SimError;
};

// Track geometry problems: projection divergence, malformed centerline.
class TrackFault : public SimError {
public:
    using SimError::SimError;
};

// Synthetic track / velocity profile generation cannot satisfy the request.
class GenerationError : public SimError {
public:
    using SimError::SimError;
};

// Metric evaluation on unusable traces (too sparse, empty, mismatched).
class MetricError : public SimError {
public:
    using SimError::SimError;
};

}  // namespace lapsim
