#pragma once

// Constant-coefficient VAR(p): least-squares fit, BIC lag choice, residual
// correlations and companion-form stability.

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"
#include "spillover/panel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <vector>

namespace spillover {

/// x_t = d + sum_j phi_j x_{t-j} + w_t. Row i of phi_j is equation i.
struct VarModel {
    std::size_t lag = 1;
    Vector intercept;
    std::vector<Matrix> coefficients;  // phi_1 .. phi_p, each N x N
    Matrix residuals;                  // (T - p) x N
    Matrix residual_cov;               // residual cross-product / (T - p)

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(intercept.size()); }

    /// (N p + 1) x N coefficient block in design order [1, x_{t-1}', ..., x_{t-p}'].
    [[nodiscard]] Matrix stacked() const {
        const auto n = static_cast<Eigen::Index>(dim());
        Matrix b(n * static_cast<Eigen::Index>(lag) + 1, n);
        b.row(0) = intercept.transpose();
        for (std::size_t j = 0; j < lag; ++j)
            b.middleRows(1 + static_cast<Eigen::Index>(j) * n, n) = coefficients[j].transpose();
        return b;
    }
};

/// Splits a stacked (N p + 1) x N block back into intercept and lag matrices.
inline void unstack_coefficients(const Matrix& stacked, std::size_t lag, Vector& intercept,
                                 std::vector<Matrix>& coefficients) {
    const Eigen::Index n = stacked.cols();
    if (stacked.rows() != n * static_cast<Eigen::Index>(lag) + 1)
        throw InvalidInput("stacked coefficient block has the wrong shape");
    intercept = stacked.row(0).transpose();
    coefficients.assign(lag, Matrix());
    for (std::size_t j = 0; j < lag; ++j)
        coefficients[j] = stacked.middleRows(1 + static_cast<Eigen::Index>(j) * n, n).transpose();
}

/// Lagged design for rows t = first .. T-1: [1, x_{t-1}', ..., x_{t-p}'].
inline Matrix var_design(const Matrix& y, std::size_t p, std::size_t first) {
    const Eigen::Index T = y.rows(), n = y.cols();
    const auto P = static_cast<Eigen::Index>(p);
    const auto F = static_cast<Eigen::Index>(first);
    Matrix x(T - F, n * P + 1);
    x.col(0).setOnes();
    for (Eigen::Index j = 1; j <= P; ++j) x.middleCols(1 + (j - 1) * n, n) = y.middleRows(F - j, T - F);
    return x;
}

namespace detail {

inline VarModel fit_var_rows(const Matrix& y, std::size_t p, std::size_t first) {
    Matrix x = var_design(y, p, first);
    Matrix target = y.bottomRows(y.rows() - static_cast<Eigen::Index>(first));
    Matrix b = least_squares(x, target);
    VarModel m;
    m.lag = p;
    unstack_coefficients(b, p, m.intercept, m.coefficients);
    m.residuals = target - x * b;
    m.residual_cov = symmetrize(cross_product_cov(m.residuals));
    return m;
}

}  // namespace detail

/// Equation-by-equation least squares on a T x N matrix.
inline VarModel fit_var(const Matrix& y, std::size_t p) {
    if (p == 0) throw InvalidInput("VAR lag must be positive");
    const auto T = static_cast<std::size_t>(y.rows());
    const auto n = static_cast<std::size_t>(y.cols());
    if (T <= p || T - p <= n * p + 1)
        throw InvalidInput("insufficient observations for VAR(" + std::to_string(p) + ")");
    return detail::fit_var_rows(y, p, p);
}

inline VarModel fit_var(const ReturnsPanel& returns, std::size_t p) { return fit_var(returns.values(), p); }

/// argmin over 1..p_max of ln det(Sigma_p) + ln(T_eff) / T_eff * (N^2 p + N),
/// every candidate fitted on the common sample t >= p_max.
inline std::size_t select_lag_bic(const Matrix& y, std::size_t p_max) {
    if (p_max == 0) throw InvalidInput("p_max must be positive");
    const auto T = static_cast<std::size_t>(y.rows());
    const auto n = static_cast<std::size_t>(y.cols());
    if (T <= p_max || T - p_max <= n * p_max + 1)
        throw InvalidInput("insufficient observations for lag search up to " + std::to_string(p_max));
    const double t_eff = static_cast<double>(T - p_max);
    std::size_t best = 1;
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t p = 1; p <= p_max; ++p) {
        auto m = detail::fit_var_rows(y.bottomRows(static_cast<Eigen::Index>(T - p_max + p)), p, p);
        Eigen::LDLT<Matrix> ldlt(m.residual_cov);
        double logdet = ldlt.vectorD().array().log().sum();
        double k = static_cast<double>(n * n * p + n);
        double bic = logdet + std::log(t_eff) / t_eff * k;
        if (bic < best_bic) {
            best_bic = bic;
            best = p;
        }
    }
    return best;
}

inline std::size_t select_lag_bic(const ReturnsPanel& r, std::size_t p_max) { return select_lag_bic(r.values(), p_max); }

struct CorrelationPair {
    Matrix conditional;
    Matrix partial;
};

/// Correlation matrix of a covariance matrix.
inline Matrix covariance_to_correlation(const Matrix& cov) {
    Vector sd = cov.diagonal().cwiseSqrt();
    if ((sd.array() <= 0.0).any()) throw NumericalError("zero variance on the covariance diagonal");
    Matrix c = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    c.diagonal().setOnes();
    return symmetrize(c).cwiseMax(-1.0).cwiseMin(1.0);
}

/// Partial correlations: negated, rescaled inverse of the correlation matrix.
inline Matrix partial_correlation(const Matrix& corr) {
    Eigen::FullPivLU<Matrix> lu(corr);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw NumericalError("singular covariance: partial correlation undefined");
    Matrix prec = lu.inverse();
    Vector d = prec.diagonal().cwiseSqrt().cwiseInverse();
    Matrix p = -(d.asDiagonal() * prec * d.asDiagonal());
    p.diagonal().setOnes();
    return symmetrize(p).cwiseMax(-1.0).cwiseMin(1.0);
}

inline CorrelationPair residual_correlations(const VarModel& model) {
    CorrelationPair out;
    out.conditional = covariance_to_correlation(model.residual_cov);
    out.partial = partial_correlation(out.conditional);
    return out;
}

/// Same pair computed from raw return covariance instead of VAR residuals.
inline CorrelationPair return_correlations(const Matrix& y) {
    CorrelationPair out;
    out.conditional = covariance_to_correlation(sample_cov(y));
    out.partial = partial_correlation(out.conditional);
    return out;
}

/// N p x N p companion matrix of phi_1..phi_p.
inline Matrix companion_matrix(const std::vector<Matrix>& coefficients) {
    if (coefficients.empty()) throw InvalidInput("no coefficient matrices");
    const Eigen::Index n = coefficients.front().rows();
    const auto p = static_cast<Eigen::Index>(coefficients.size());
    Matrix c = Matrix::Zero(n * p, n * p);
    for (Eigen::Index j = 0; j < p; ++j) c.block(0, j * n, n, n) = coefficients[static_cast<std::size_t>(j)];
    if (p > 1) c.block(n, 0, n * (p - 1), n * (p - 1)).setIdentity();
    return c;
}

inline double spectral_radius(const std::vector<Matrix>& coefficients) {
    Eigen::EigenSolver<Matrix> es(companion_matrix(coefficients), false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Max modulus eigenvalue of the companion matrix; >= 1 means non-stationary.
inline double stability_check(const VarModel& model) { return spectral_radius(model.coefficients); }

}  // namespace spillover
