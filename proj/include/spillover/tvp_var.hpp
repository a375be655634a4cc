#pragma once

// Time-varying-parameter VAR estimated by a forgetting-factor Kalman filter.
//
// State: vec of the (N p + 1) x N stacked coefficient block, one column per
// equation. Each step predicts with covariance P / kappa1, updates on the
// observation with measurement covariance S_{t-1}, then refreshes
// S_t = kappa2 S_{t-1} + (1 - kappa2) e_t e_t'.

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"
#include "spillover/panel.hpp"
#include "spillover/var.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>

#include <ostream>
#include <string>
#include <vector>

namespace spillover {

struct TvpConfig {
    std::size_t lag = 1;
    double kappa1 = 0.99;       // state forgetting
    double kappa2 = 0.96;       // covariance decay
    double prior_scale = 0.1;   // initial state covariance = prior_scale * I
    std::size_t burn_in = 20;   // steps excluded from summaries
    std::size_t init_window = 100;  // observations for the initial least-squares fit; 0 = full sample

    void validate() const {
        if (lag == 0) throw InvalidInput("TVP lag must be positive");
        if (!(kappa1 > 0.0 && kappa1 <= 1.0)) throw InvalidInput("kappa1 must lie in (0, 1]");
        if (!(kappa2 > 0.0 && kappa2 <= 1.0)) throw InvalidInput("kappa2 must lie in (0, 1]");
        if (!(prior_scale > 0.0) || !std::isfinite(prior_scale)) throw InvalidInput("prior_scale must be positive");
    }
};

/// Per-step filtered output. Index k corresponds to observation row p + k.
struct TvpPath {
    std::size_t lag = 1;
    std::size_t burn_in = 0;
    std::vector<Matrix> coefficients;  // stacked (N p + 1) x N, filtered on data through step k
    std::vector<Matrix> covariances;   // S_k, N x N
    Matrix errors;                     // one-step prediction errors, (T - p) x N
    std::vector<Date> dates;           // empty when fitted from a bare matrix
    Matrix initial_coefficients;       // least-squares starting state
    Matrix initial_covariance;         // starting S
    std::vector<bool> repaired;        // per step: S needed an SPSD clamp

    [[nodiscard]] std::size_t size() const noexcept { return coefficients.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(errors.cols()); }
};

struct TvpSnapshot {
    Vector intercept;
    std::vector<Matrix> coefficients;  // phi_1..phi_p
    Matrix covariance;
};

namespace detail {

inline Matrix tvp_initial_block(const Matrix& y, const TvpConfig& cfg, Matrix& s0) {
    const auto T = static_cast<std::size_t>(y.rows());
    std::size_t window = cfg.init_window == 0 ? T : std::min(cfg.init_window, T);
    auto init = fit_var(y.topRows(static_cast<Eigen::Index>(window)), cfg.lag);
    s0 = init.residual_cov;
    return init.stacked();
}

}  // namespace detail

/// Filters the whole sample. Throws DivergenceError naming the observation
/// row at which the state or covariance stops being finite.
inline TvpPath fit_tvp_var(const Matrix& y, const TvpConfig& cfg) {
    cfg.validate();
    const auto T = static_cast<std::size_t>(y.rows());
    const Eigen::Index n = y.cols();
    const std::size_t p = cfg.lag;
    if (T <= p || T - p <= cfg.burn_in + 1)
        throw InvalidInput("insufficient observations for TVP-VAR(" + std::to_string(p) + ") with burn-in " +
                           std::to_string(cfg.burn_in));
    if (!y.allFinite()) throw InvalidInput("non-finite value in TVP-VAR input");

    TvpPath path;
    path.lag = p;
    path.burn_in = cfg.burn_in;
    Matrix S;
    Matrix B = detail::tvp_initial_block(y, cfg, S);
    path.initial_coefficients = B;
    path.initial_covariance = S;

    const Eigen::Index K = B.rows();
    const Eigen::Index dim = K * n;
    Vector theta = B.reshaped();  // column-major: equation i occupies [iK, (i+1)K)
    Matrix P = cfg.prior_scale * Matrix::Identity(dim, dim);

    const Matrix X = var_design(y, p, p);
    const std::size_t steps = T - p;
    path.coefficients.reserve(steps);
    path.covariances.reserve(steps);
    path.repaired.reserve(steps);
    path.errors.resize(static_cast<Eigen::Index>(steps), n);

    Matrix PHt(dim, n), F(n, n);
    for (std::size_t k = 0; k < steps; ++k) {
        const Eigen::Index row = static_cast<Eigen::Index>(k);
        const Vector z = X.row(row).transpose();
        P /= cfg.kappa1;

        // H = I_N (x) z'; P H' and H P H' assembled block-wise.
        for (Eigen::Index i = 0; i < n; ++i) PHt.col(i).noalias() = P.middleCols(i * K, K) * z;
        for (Eigen::Index i = 0; i < n; ++i) F.row(i).noalias() = z.transpose() * PHt.middleRows(i * K, K);
        F = symmetrize(F) + S;

        Vector pred(n);
        for (Eigen::Index i = 0; i < n; ++i) pred(i) = theta.segment(i * K, K).dot(z);
        const Vector e = y.row(static_cast<Eigen::Index>(p + k)).transpose() - pred;

        Eigen::LLT<Matrix> llt(F);
        if (llt.info() != Eigen::Success) throw DivergenceError("innovation covariance lost positive definiteness", p + k);
        const Matrix gain = llt.solve(PHt.transpose()).transpose();  // dim x N
        theta.noalias() += gain * e;
        P.noalias() -= gain * PHt.transpose();
        P = symmetrize(P);

        S = cfg.kappa2 * S + (1.0 - cfg.kappa2) * (e * e.transpose());
        bool repaired = false;
        S = spsd_repair(S, &repaired);
        path.repaired.push_back(repaired);

        if (!theta.allFinite() || !S.allFinite() || !P.allFinite())
            throw DivergenceError("TVP-VAR state diverged", p + k);
        path.errors.row(row) = e.transpose();
        path.coefficients.push_back(theta.reshaped(K, n));
        path.covariances.push_back(S);
    }
    return path;
}

inline TvpPath fit_tvp_var(const ReturnsPanel& returns, const TvpConfig& cfg) {
    auto path = fit_tvp_var(returns.values(), cfg);
    path.dates.assign(returns.dates().begin() + static_cast<std::ptrdiff_t>(cfg.lag), returns.dates().end());
    return path;
}

/// Filtered coefficients and covariance at path step k (observation row p + k).
inline TvpSnapshot path_slice(const TvpPath& path, std::size_t k) {
    if (k >= path.size())
        throw InvalidInput("path index " + std::to_string(k) + " out of range [0, " + std::to_string(path.size()) + ")");
    TvpSnapshot s;
    unstack_coefficients(path.coefficients[k], path.lag, s.intercept, s.coefficients);
    s.covariance = path.covariances[k];
    return s;
}

/// Starting state used by the filter.
inline TvpSnapshot initial_slice(const TvpPath& path) {
    TvpSnapshot s;
    unstack_coefficients(path.initial_coefficients, path.lag, s.intercept, s.coefficients);
    s.covariance = path.initial_covariance;
    return s;
}

/// Long-format dump: date,step,block,row,col,value with block in {S, phi}.
/// phi rows follow the stacked design order (0 = intercept).
inline void write_tvp_csv(std::ostream& out, const TvpPath& path, const std::vector<std::string>& ids) {
    out << "date,step,block,row,col,value\n";
    char buf[64];
    for (std::size_t k = 0; k < path.size(); ++k) {
        const std::string date = k < path.dates.size() ? path.dates[k].str() : std::string();
        auto emit = [&](const char* block, const Matrix& m, bool design_rows) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) {
                    std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
                    out << date << ',' << k << ',' << block << ',';
                    if (design_rows)
                        out << r;
                    else
                        out << ids.at(static_cast<std::size_t>(r));
                    out << ',' << ids.at(static_cast<std::size_t>(c)) << ',' << buf << '\n';
                }
        };
        emit("S", path.covariances[k], false);
        emit("phi", path.coefficients[k], true);
    }
}

}  // namespace spillover
