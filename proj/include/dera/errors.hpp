#pragma once

#include <stdexcept>
#include <string>

namespace dera {

/// Bad user-facing configuration (CLI flags, config files, invalid parameters).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch between vectors that must agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Timestep or array index outside the valid range.
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Geometric interpolation asked for a non-positive precision (lambda outside
/// the convex regime with incompatible variances).
struct NonPositiveDefiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Quadratic tilt would produce a non-integrable component (beta too small
/// for the reward curvature).
struct NonNormalizableTiltError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numeric integration grid does not cover the distribution it is asked to
/// normalize.
struct OracleCoverageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Not enough data points for the requested statistic.
struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// NaN or infinity produced where a finite value is required.
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dera
