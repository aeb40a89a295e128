#pragma once

#include <stdexcept>
#include <string>

namespace tfbsde {

struct NonIntegrableMeasure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExponentialTailViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct QuadratureFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateMeasure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalBreakdown : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedMeasure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteData : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RegressionSingular : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoContraction : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MaxIterExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DeltaUnderflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GridMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct HypothesisViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace tfbsde
