#pragma once

#include <stdexcept>
#include <string>

namespace rse {

/// A field does not conform to the grid it is used with.
struct ConformityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid run configuration: bad sizes, out-of-range values, unknown keys.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Degenerate input to a statistical routine (e.g. constant samples).
struct StatisticsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Stats files do not match the configuration they are analyzed under.
struct StaleInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical blow-up during time integration. Carries the trajectory
/// context that was known at the point of failure.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(const std::string& what, double t, long step)
        : std::runtime_error(what), t_(t), step_(step) {}

    double time() const { return t_; }
    long step() const { return step_; }

private:
    double t_;
    long step_;
};

}  // namespace rse
