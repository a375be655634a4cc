#pragma once

// Quantile VAR: equation-wise quantile regression on the lagged VAR design,
// and connectedness evaluated per quantile over rolling windows.
//
// Each regression minimizes the pinball loss by majorize-minimize IRLS: with
// w_i = 1 / (eps + |r_i|), the step solves the weighted least-squares problem
// for the adjusted response y_i + (2 tau - 1) / w_i, while eps shrinks
// geometrically to 1e-8. The IRLS point then seeds a basis-exchange descent
// that lands on an exact vertex solution and certifies it.

#include "spillover/common.hpp"
#include "spillover/connectedness.hpp"
#include "spillover/linalg.hpp"
#include "spillover/panel.hpp"
#include "spillover/var.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace spillover {

inline double pinball_loss(const Vector& residuals, double tau) {
    double s = 0.0;
    for (double r : residuals) s += r * (r < 0.0 ? tau - 1.0 : tau);
    return s;
}

struct QuantileSolverOptions {
    std::size_t max_iterations = 200;
    double tolerance = 1e-8;       // max abs coefficient change, relative to 1 + |beta|
    double min_smoothing = 1e-8;
    std::size_t max_pivots = 0;    // basis exchanges in the polish; 0 picks 50 per regressor
    bool exact_polish = true;
    bool strict = false;           // throw when neither convergence nor a certificate is reached
};

struct QuantileFit {
    Vector beta;
    double loss = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool certified = false;  // beta passed the exact subgradient optimality check
    double last_change = 0.0;
};

inline void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("quantile " + std::to_string(tau) + " outside (0, 1)");
}

namespace detail {

/// Basic solution through the K observations with the smallest |r| that give
/// a nonsingular system. Returns false when no such basis exists.
inline bool interpolating_basis(const Matrix& X, const Vector& y, const Vector& r, std::vector<Eigen::Index>& basis,
                                Vector& beta) {
    const Eigen::Index K = X.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(r(a)) < std::abs(r(b)); });
    basis.clear();
    Matrix rows(0, K);
    for (Eigen::Index i : order) {
        Matrix trial(rows.rows() + 1, K);
        trial << rows, X.row(i);
        Eigen::FullPivLU<Matrix> lu(trial);
        lu.setThreshold(1e-10);
        if (lu.rank() == trial.rows()) {
            rows = trial;
            basis.push_back(i);
            if (rows.rows() == K) break;
        }
    }
    if (rows.rows() < K) return false;
    Vector yb(K);
    for (Eigen::Index k = 0; k < K; ++k) yb(k) = y(basis[static_cast<std::size_t>(k)]);
    beta = rows.fullPivLu().solve(yb);
    return beta.allFinite();
}

/// Simplex-style descent over basic solutions. At basis B the multipliers
/// lambda solve X_B' lambda = -sum_{i not in B} psi_tau(r_i) x_i; the basis is
/// optimal iff every lambda_k lies in [tau - 1, tau]. Otherwise the violating
/// row leaves the basis and an exact line search over the piecewise-linear
/// loss picks the entering row. Returns true when optimality is certified.
inline bool basis_descent(const Matrix& X, const Vector& y, double tau, std::vector<Eigen::Index>& basis,
                          Vector& beta, std::size_t max_pivots) {
    const Eigen::Index n = X.rows();
    const Eigen::Index K = X.cols();
    std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
    for (auto i : basis) in_basis[static_cast<std::size_t>(i)] = 1;
    Matrix xb(K, K);
    std::vector<std::pair<double, Eigen::Index>> breaks;
    for (std::size_t pivot = 0;; ++pivot) {
        Vector r = y - X * beta;
        for (auto i : basis) r(i) = 0.0;
        Vector g = Vector::Zero(K);
        for (Eigen::Index i = 0; i < n; ++i)
            if (!in_basis[static_cast<std::size_t>(i)]) g += (r(i) < 0.0 ? tau - 1.0 : tau) * X.row(i).transpose();
        for (Eigen::Index k = 0; k < K; ++k) xb.row(k) = X.row(basis[static_cast<std::size_t>(k)]);
        Eigen::FullPivLU<Matrix> lu(xb);
        if (!lu.isInvertible()) return false;
        const Vector lambda = lu.transpose().solve(-g);
        const double slack = 1e-9 * (1.0 + g.cwiseAbs().maxCoeff());
        Eigen::Index leave = -1;
        double worst = slack, sign = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            if (lambda(k) - tau > worst) {
                worst = lambda(k) - tau;
                leave = k;
                sign = -1.0;
            }
            if (tau - 1.0 - lambda(k) > worst) {
                worst = tau - 1.0 - lambda(k);
                leave = k;
                sign = 1.0;
            }
        }
        if (leave < 0) return true;
        if (pivot >= max_pivots) return false;

        const Vector d = lu.solve(Vector(sign * Vector::Unit(K, leave)));
        const Vector gd = X * d;
        // Slope of the loss at t = 0+ along beta + t d.
        double slope = sign > 0.0 ? lambda(leave) + 1.0 - tau : tau - lambda(leave);
        breaks.clear();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (in_basis[static_cast<std::size_t>(i)] || gd(i) == 0.0) continue;
            const double t = r(i) / gd(i);
            if (t > 0.0) breaks.emplace_back(t, i);
        }
        std::sort(breaks.begin(), breaks.end());
        Eigen::Index enter = -1;
        double step = 0.0;
        for (const auto& [t, i] : breaks) {
            slope += std::abs(gd(i));
            if (slope >= 0.0) {
                enter = i;
                step = t;
                break;
            }
        }
        if (enter < 0) return false;  // unbounded direction: cannot happen for a proper quantile problem
        beta += step * d;
        in_basis[static_cast<std::size_t>(basis[static_cast<std::size_t>(leave)])] = 0;
        basis[static_cast<std::size_t>(leave)] = enter;
        in_basis[static_cast<std::size_t>(enter)] = 1;
    }
}

}  // namespace detail

/// Pinball-loss regression of y on X. `start` warm-starts the iteration
/// (least squares when empty). The best iterate by loss is returned, so the
/// loss never exceeds the loss at the starting point.
inline QuantileFit quantile_regression(const Matrix& X, const Vector& y, double tau, const Vector& start = Vector(),
                                       const QuantileSolverOptions& opt = {}) {
    check_tau(tau);
    if (X.rows() != y.size()) throw InvalidInput("design and response lengths differ");
    if (X.rows() <= X.cols()) throw InvalidInput("quantile regression needs more observations than regressors");
    Vector beta = start.size() == X.cols() ? start : Vector(least_squares(X, y));
    Vector r = y - X * beta;

    QuantileFit best;
    best.beta = beta;
    best.loss = pinball_loss(r, tau);

    const double scale = std::max(r.cwiseAbs().sum() / static_cast<double>(r.size()), 1e-300);
    double eps = std::max(1e-3 * scale, opt.min_smoothing);
    const double skew = 2.0 * tau - 1.0;
    Matrix wx(X.rows(), X.cols());
    Vector wy(y.size());
    QuantileFit out = best;
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double a = eps + std::abs(r(i));
            const double sw = 1.0 / std::sqrt(a);
            wx.row(i) = sw * X.row(i);
            wy(i) = sw * (y(i) + skew * a);
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(wx);
        Vector next = qr.solve(wy);
        if (!next.allFinite()) throw NumericalError("quantile regression produced a non-finite step");
        const double change = ((next - beta).array().abs() / (1.0 + beta.array().abs())).maxCoeff();
        beta = next;
        r = y - X * beta;
        const double loss = pinball_loss(r, tau);
        if (loss < best.loss) {
            best.beta = beta;
            best.loss = loss;
        }
        out.iterations = it;
        out.last_change = change;
        const bool at_floor = eps <= opt.min_smoothing;
        if (at_floor && change < opt.tolerance) {
            out.converged = true;
            break;
        }
        eps = std::max(eps * 0.1, opt.min_smoothing);
    }
    // Polish: an exact minimizer interpolates K observations. Start from the
    // basis of smallest residuals and descend until the certificate holds.
    std::vector<Eigen::Index> basis;
    Vector exact;
    if (opt.exact_polish && detail::interpolating_basis(X, y, y - X * best.beta, basis, exact)) {
        const Vector re = y - X * exact;
        const double loss = pinball_loss(re, tau);
        if (loss <= best.loss) {
            best.beta = exact;
            best.loss = loss;
        }
        Vector polished = exact;
        const bool certified = detail::basis_descent(
            X, y, tau, basis, polished, opt.max_pivots > 0 ? opt.max_pivots : 50 * static_cast<std::size_t>(X.cols()));
        const double polished_loss = pinball_loss(y - X * polished, tau);
        if (polished_loss <= best.loss) {
            best.beta = polished;
            best.loss = polished_loss;
            out.certified = certified;
            out.converged = out.converged || certified;
        }
    }
    if (!out.converged && opt.strict)
        throw NumericalError("quantile regression did not converge in " + std::to_string(opt.max_iterations) +
                             " iterations (last change " + std::to_string(out.last_change) + ")");
    out.beta = best.beta;
    out.loss = best.loss;
    return out;
}

enum class QvarCovariance { residual_cross_product, least_squares_residual };

inline std::string to_string(QvarCovariance c) {
    return c == QvarCovariance::residual_cross_product ? "residual_cross_product" : "least_squares_residual";
}

inline QvarCovariance parse_qvar_covariance(const std::string& s) {
    if (s == "residual_cross_product") return QvarCovariance::residual_cross_product;
    if (s == "least_squares_residual") return QvarCovariance::least_squares_residual;
    throw InvalidInput("unknown QVAR covariance '" + s + "'");
}

struct QuantileVarModel {
    double tau = 0.5;
    VarModel model;               // coefficients at tau; residual_cov is the covariance proxy
    std::vector<QuantileFit> fits;  // per equation

    [[nodiscard]] bool converged() const {
        for (const auto& f : fits)
            if (!f.converged) return false;
        return true;
    }
};

/// `warm` optionally carries a previous stacked block to start from.
inline QuantileVarModel fit_quantile_var(const Matrix& y, std::size_t p, double tau,
                                         QvarCovariance cov = QvarCovariance::residual_cross_product,
                                         const Matrix& warm = Matrix(), const QuantileSolverOptions& opt = {}) {
    check_tau(tau);
    if (p == 0) throw InvalidInput("VAR lag must be positive");
    const auto T = static_cast<std::size_t>(y.rows());
    const auto n = static_cast<std::size_t>(y.cols());
    if (T <= p || T - p <= n * p + 1)
        throw InvalidInput("insufficient observations for quantile VAR(" + std::to_string(p) + ")");
    const Matrix X = var_design(y, p, p);
    const Matrix target = y.bottomRows(static_cast<Eigen::Index>(T - p));
    Matrix B(X.cols(), y.cols());
    QuantileVarModel out;
    out.tau = tau;
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
        Vector start = warm.rows() == X.cols() && warm.cols() == y.cols() ? Vector(warm.col(i)) : Vector();
        auto fit = quantile_regression(X, target.col(i), tau, start, opt);
        B.col(i) = fit.beta;
        out.fits.push_back(std::move(fit));
    }
    out.model.lag = p;
    unstack_coefficients(B, p, out.model.intercept, out.model.coefficients);
    out.model.residuals = target - X * B;
    if (cov == QvarCovariance::residual_cross_product) {
        out.model.residual_cov = symmetrize(cross_product_cov(out.model.residuals));
    } else {
        out.model.residual_cov = fit_var(y, p).residual_cov;
    }
    return out;
}

inline QuantileVarModel fit_quantile_var(const ReturnsPanel& returns, std::size_t p, double tau,
                                         QvarCovariance cov = QvarCovariance::residual_cross_product) {
    return fit_quantile_var(returns.values(), p, tau, cov);
}

inline std::vector<double> default_quantile_grid() {
    std::vector<double> q;
    for (int k = 0; k < 10; ++k) q.push_back(0.05 + 0.1 * k);
    return q;
}

struct QvarGridConfig {
    std::vector<double> quantiles = default_quantile_grid();
    std::size_t window = 120;
    std::size_t lag = 1;
    std::size_t horizon = 10;
    std::size_t stride = 1;  // evaluate every stride-th window end (the last end is always included)
    QvarCovariance covariance = QvarCovariance::residual_cross_product;
    FevdMethod method = FevdMethod::generalized;

    void validate(std::size_t T, std::size_t n) const {
        if (quantiles.empty()) throw InvalidInput("quantile grid is empty");
        for (std::size_t k = 0; k < quantiles.size(); ++k) {
            check_tau(quantiles[k]);
            if (k > 0 && !(quantiles[k] > quantiles[k - 1])) throw InvalidInput("quantile grid must be strictly increasing");
        }
        if (stride == 0) throw InvalidInput("stride must be positive");
        if (horizon == 0) throw InvalidInput("horizon must be positive");
        if (window > T) throw InvalidInput("QVAR window exceeds sample length");
        if (lag == 0 || window <= lag || window - lag <= n * lag + 1) throw InvalidInput("QVAR window too short for the lag");
    }
};

/// Heatmap grids: rows are quantiles, columns are window end dates.
struct QvarGridResult {
    std::vector<double> quantiles;
    std::vector<Date> dates;
    std::vector<std::string> ids;
    Matrix tci;                // quantiles x windows
    std::vector<Matrix> net;   // per series: quantiles x windows
    std::size_t unconverged = 0;  // regressions that hit the iteration cap
};

inline QvarGridResult qvar_connectedness_grid(const ReturnsPanel& returns, const QvarGridConfig& cfg,
                                              const QuantileSolverOptions& opt = {}) {
    const std::size_t T = returns.length();
    const std::size_t n = returns.width();
    cfg.validate(T, n);
    std::vector<std::size_t> ends;
    for (std::size_t e = cfg.window; e <= T; e += cfg.stride) ends.push_back(e);
    if (ends.back() != T) ends.push_back(T);

    QvarGridResult out;
    out.quantiles = cfg.quantiles;
    out.ids = returns.ids();
    const auto nq = static_cast<Eigen::Index>(cfg.quantiles.size());
    const auto nw = static_cast<Eigen::Index>(ends.size());
    out.tci.resize(nq, nw);
    out.net.assign(n, Matrix(nq, nw));
    for (auto e : ends) out.dates.push_back(returns.dates()[e - 1]);

    const Matrix& y = returns.values();
    for (Eigen::Index q = 0; q < nq; ++q) {
        Matrix warm;
        for (Eigen::Index w = 0; w < nw; ++w) {
            const std::size_t end = ends[static_cast<std::size_t>(w)];
            auto fit = fit_quantile_var(y.middleRows(static_cast<Eigen::Index>(end - cfg.window),
                                                     static_cast<Eigen::Index>(cfg.window)),
                                        cfg.lag, cfg.quantiles[static_cast<std::size_t>(q)], cfg.covariance, warm, opt);
            for (const auto& f : fit.fits) out.unconverged += f.converged ? 0 : 1;
            warm = fit.model.stacked();
            auto s = summarize(gfevd(fit.model, cfg.horizon, cfg.method));
            out.tci(q, w) = s.tci;
            for (std::size_t i = 0; i < n; ++i) out.net[i](q, w) = s.net(static_cast<Eigen::Index>(i));
        }
    }
    return out;
}

}  // namespace spillover
