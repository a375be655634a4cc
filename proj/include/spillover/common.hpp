#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spillover {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an input violates an operation's preconditions.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot proceed (singular system, blow-up, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A recursion produced a non-finite state at a known step.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

enum class Decision { reject, fail_to_reject };

/// Outcome of a hypothesis test. `decision` is reject iff p_value < level.
struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t lag = 0;
    double level = 0.05;
    Decision decision = Decision::fail_to_reject;

    [[nodiscard]] bool rejected() const noexcept { return decision == Decision::reject; }
};

inline TestResult make_result(double statistic, double p_value, std::size_t lag, double level) {
    TestResult r;
    r.statistic = statistic;
    r.p_value = p_value;
    r.lag = lag;
    r.level = level;
    r.decision = p_value < level ? Decision::reject : Decision::fail_to_reject;
    return r;
}

/// Significance stars on the 0.1 / 0.05 / 0.01 / 0.005 ladder.
inline std::string significance_stars(double p) {
    if (p <= 0.005) return "***";
    if (p <= 0.01) return "**";
    if (p <= 0.05) return "*";
    if (p <= 0.1) return ".";
    return "";
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace spillover
