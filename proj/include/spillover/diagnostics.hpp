#pragma once

// Test battery for return panels: moments, normality, serial correlation in
// squares, unit roots, VAR parameter stability and pairwise cointegration.

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"
#include "spillover/mackinnon.hpp"
#include "spillover/panel.hpp"
#include "spillover/var.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace spillover {

// ---------------------------------------------------------------------------
// Moments, Jarque-Bera, Ljung-Box on squares
// ---------------------------------------------------------------------------

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // population (divides by n)
    double skewness = 0.0;
    double kurtosis = 0.0;  // raw, normal = 3
};

inline Moments moments(const Vector& x) {
    const double n = static_cast<double>(x.size());
    Moments m;
    m.mean = x.mean();
    Eigen::ArrayXd c = x.array() - m.mean;
    const double m2 = c.square().sum() / n;
    const double m3 = c.cube().sum() / n;
    const double m4 = c.square().square().sum() / n;
    m.variance = m2;
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2);
    }
    return m;
}

/// n/6 (S^2 + (K-3)^2/4), chi-square(2) upper tail.
inline TestResult jarque_bera(const Vector& x, double level = 0.05) {
    if (x.size() < 8) throw InvalidInput("Jarque-Bera needs at least 8 observations");
    auto m = moments(x);
    if (!(m.variance > 0.0)) throw InvalidInput("Jarque-Bera undefined for a zero-variance input");
    const double n = static_cast<double>(x.size());
    const double stat = n / 6.0 * (m.skewness * m.skewness + 0.25 * (m.kurtosis - 3.0) * (m.kurtosis - 3.0));
    return make_result(stat, std::exp(-0.5 * stat), 0, level);
}

/// Ljung-Box Q on x^2 with chi-square(lags) p-value. A constant squared
/// series carries no autocorrelation and yields Q = 0.
inline TestResult ljung_box_sq(const Vector& x, std::size_t lags = 20, double level = 0.05) {
    if (lags == 0) throw InvalidInput("Ljung-Box needs at least one lag");
    const auto n = static_cast<std::size_t>(x.size());
    if (n <= lags + 1) throw InvalidInput("series too short for Ljung-Box with " + std::to_string(lags) + " lags");
    Eigen::ArrayXd y = x.array().square();
    y -= y.mean();
    const double denom = y.square().sum();
    if (!(denom > 0.0)) return make_result(0.0, 1.0, lags, level);
    const double nn = static_cast<double>(n);
    double q = 0.0;
    for (std::size_t k = 1; k <= lags; ++k) {
        const auto len = static_cast<Eigen::Index>(n - k);
        const double rho = (y.tail(len) * y.head(len)).sum() / denom;
        q += rho * rho / (nn - static_cast<double>(k));
    }
    q *= nn * (nn + 2.0);
    return make_result(q, chi2_sf(q, static_cast<double>(lags)), lags, level);
}

struct DescriptiveRow {
    std::string id;
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
    double jb_stat = 0.0;
    double jb_p = 1.0;
    double q2_stat = 0.0;
    double q2_p = 1.0;
};

inline DescriptiveRow describe_series(const std::string& id, const Vector& x, std::size_t q_lags = 20) {
    if (x.size() < 25) throw InvalidInput("column '" + id + "' too short to describe (need >= 25)");
    auto m = moments(x);
    DescriptiveRow row;
    row.id = id;
    row.mean = m.mean;
    row.median = median(x);
    row.sd = std::sqrt(variance(x));
    row.skewness = m.skewness;
    row.kurtosis = m.kurtosis;
    auto jb = jarque_bera(x);
    row.jb_stat = jb.statistic;
    row.jb_p = jb.p_value;
    auto q = ljung_box_sq(x, q_lags);
    row.q2_stat = q.statistic;
    row.q2_p = q.p_value;
    return row;
}

inline std::vector<DescriptiveRow> describe(const ReturnsPanel& returns, std::size_t q_lags = 20) {
    std::vector<DescriptiveRow> rows;
    for (std::size_t i = 0; i < returns.width(); ++i)
        rows.push_back(describe_series(returns.meta()[i].id, returns.column(i), q_lags));
    return rows;
}

// ---------------------------------------------------------------------------
// Augmented Dickey-Fuller
// ---------------------------------------------------------------------------

enum class LagRule { fixed, info_criterion };
enum class Deterministic { none, constant };

struct AdfOptions {
    std::optional<std::size_t> max_lag;  // default floor(12 (n/100)^0.25)
    LagRule lag_rule = LagRule::info_criterion;
    Deterministic deterministic = Deterministic::constant;
    double level = 0.05;
};

struct AdfResult {
    TestResult test;
    std::size_t nobs = 0;
    mackinnon::CriticalValues critical{};
};

inline std::size_t default_adf_max_lag(std::size_t n) {
    return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

namespace detail {

struct OlsFit {
    Vector coef;
    double ssr = 0.0;
    Matrix xtx_inv;
};

inline OlsFit ols_with_cov(const Matrix& X, const Vector& y) {
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw NumericalError("singular design matrix");
    OlsFit f;
    f.coef = qr.solve(y);
    f.ssr = (y - X * f.coef).squaredNorm();
    const Eigen::Index k = X.cols();
    Matrix r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
    Matrix inv_perm = rinv * rinv.transpose();
    f.xtx_inv = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
    return f;
}

struct AdfRegression {
    Matrix X;
    Vector y;
    Eigen::Index level_col = 0;
};

// Rows use dx[i] for i = start .. n-2 (dx[i] = x[i+1] - x[i]).
inline AdfRegression adf_regression(const Vector& x, std::size_t lags, std::size_t start, Deterministic det) {
    const auto n = static_cast<std::size_t>(x.size());
    Vector dx = x.tail(static_cast<Eigen::Index>(n - 1)) - x.head(static_cast<Eigen::Index>(n - 1));
    const auto rows = static_cast<Eigen::Index>(n - 1 - start);
    const Eigen::Index offset = det == Deterministic::constant ? 1 : 0;
    AdfRegression reg;
    reg.X.resize(rows, offset + 1 + static_cast<Eigen::Index>(lags));
    reg.y = dx.tail(rows);
    if (offset) reg.X.col(0).setOnes();
    reg.level_col = offset;
    const auto s = static_cast<Eigen::Index>(start);
    reg.X.col(offset) = x.segment(s, rows);
    for (Eigen::Index j = 1; j <= static_cast<Eigen::Index>(lags); ++j)
        reg.X.col(offset + j) = dx.segment(s - j, rows);
    return reg;
}

}  // namespace detail

/// Regression of dx_t on [const], x_{t-1} and lagged differences; the
/// statistic is the t-ratio on x_{t-1}. `n_series` picks the MacKinnon
/// surface (1 for a unit-root test, 2 for a two-variable cointegration residual).
inline AdfResult adf_test(const Vector& x, const AdfOptions& opt = {}, int n_series = 1) {
    const auto n = static_cast<std::size_t>(x.size());
    const std::size_t max_lag = opt.max_lag.value_or(default_adf_max_lag(n));
    if (n <= max_lag + 10) throw InvalidInput("series too short for ADF with max lag " + std::to_string(max_lag));

    std::size_t lag = max_lag;
    if (opt.lag_rule == LagRule::info_criterion) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= max_lag; ++k) {
            auto reg = detail::adf_regression(x, k, max_lag, opt.deterministic);
            auto fit = detail::ols_with_cov(reg.X, reg.y);
            const double m = static_cast<double>(reg.y.size());
            const double bic = m * std::log(fit.ssr / m) + static_cast<double>(reg.X.cols()) * std::log(m);
            if (bic < best) {
                best = bic;
                lag = k;
            }
        }
    }
    auto reg = detail::adf_regression(x, lag, lag, opt.deterministic);
    auto fit = detail::ols_with_cov(reg.X, reg.y);
    const double dof = static_cast<double>(reg.X.rows() - reg.X.cols());
    if (dof <= 0) throw InvalidInput("no residual degrees of freedom in ADF regression");
    const double sigma2 = fit.ssr / dof;
    const double se = std::sqrt(sigma2 * fit.xtx_inv(reg.level_col, reg.level_col));
    if (!(se > 0.0) || !std::isfinite(se)) throw NumericalError("degenerate ADF regression (zero residual variance)");
    const double tau = fit.coef(reg.level_col) / se;

    AdfResult out;
    out.test = make_result(tau, mackinnon::pvalue(tau, n_series), lag, opt.level);
    out.nobs = static_cast<std::size_t>(reg.y.size());
    out.critical = mackinnon::critical_values(out.nobs, n_series);
    return out;
}

// ---------------------------------------------------------------------------
// Engle-Granger
// ---------------------------------------------------------------------------

struct EngleGrangerResult {
    TestResult test;         // residual ADF on the two-variable surface
    double intercept = 0.0;  // step-1 regression y = a + b x + u
    double slope = 0.0;
    TestResult residual_jb;  // normality of the cointegrating residual
};

/// Two-step test: OLS of y on [1, x], then ADF without constant on the residual.
inline EngleGrangerResult engle_granger_pair(const Vector& y, const Vector& x, const AdfOptions& opt = {}) {
    if (y.size() != x.size()) throw InvalidInput("Engle-Granger series lengths differ");
    if (y.size() < 50) throw InvalidInput("Engle-Granger needs at least 50 observations");
    if (!(variance(x) > 0.0)) throw InvalidInput("zero-variance regressor in Engle-Granger step 1");
    Matrix X(x.size(), 2);
    X.col(0).setOnes();
    X.col(1) = x;
    Vector b = least_squares(X, y);
    Vector u = y - X * b;
    const double scale = std::max((y.array() - y.mean()).matrix().norm(), 1e-300);
    if (u.norm() <= 1e-10 * scale)
        throw InvalidInput("Engle-Granger residual is identically zero (degenerate pair)");

    AdfOptions residual_opt = opt;
    residual_opt.deterministic = Deterministic::none;
    EngleGrangerResult out;
    out.test = adf_test(u, residual_opt, 2).test;
    out.intercept = b(0);
    out.slope = b(1);
    out.residual_jb = jarque_bera(u, opt.level);
    return out;
}

struct HypothesisResult {
    std::string name;
    Role first;
    Role second;
    std::size_t pairs = 0;            // unordered role pairs found in the panel
    std::size_t bidirectional = 0;    // of which both directions reject
    bool supported = false;           // applicable and every pair bidirectional
};

struct CointegrationMatrix {
    std::vector<std::string> ids;
    std::vector<std::vector<std::optional<EngleGrangerResult>>> cells;  // cells[i][j]: i regressed on j
    std::vector<HypothesisResult> hypotheses;
};

/// Role pairs of the six bidirectional-cointegration hypotheses.
inline std::vector<HypothesisResult> cointegration_hypotheses() {
    return {
        {"H1", Role::investor_sentiment, Role::portfolio},
        {"H2", Role::energy_market, Role::portfolio},
        {"H3", Role::shipping_cost, Role::portfolio},
        {"H4", Role::investor_sentiment, Role::energy_market},
        {"H5", Role::investor_sentiment, Role::shipping_cost},
        {"H6", Role::energy_market, Role::shipping_cost},
    };
}

inline CointegrationMatrix cointegration_matrix(const Matrix& data, const std::vector<SeriesMeta>& meta,
                                                const AdfOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(data.cols());
    if (n < 2) throw InvalidInput("cointegration matrix needs at least two series");
    if (meta.size() != n) throw InvalidInput("metadata count does not match columns");
    CointegrationMatrix out;
    for (const auto& m : meta) out.ids.push_back(m.id);
    out.cells.assign(n, std::vector<std::optional<EngleGrangerResult>>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j)
                out.cells[i][j] = engle_granger_pair(data.col(static_cast<Eigen::Index>(i)),
                                                     data.col(static_cast<Eigen::Index>(j)), opt);

    out.hypotheses = cointegration_hypotheses();
    for (auto& h : out.hypotheses) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (meta[i].role != h.first || meta[j].role != h.second) continue;
                ++h.pairs;
                if (out.cells[i][j]->test.rejected() && out.cells[j][i]->test.rejected()) ++h.bidirectional;
            }
        h.supported = h.pairs > 0 && h.bidirectional == h.pairs;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chow stability tests for a VAR
// ---------------------------------------------------------------------------

struct ChowOptions {
    std::size_t lag = 1;
    std::size_t bootstrap_reps = 499;
    std::uint64_t seed = 12345;
    double level = 0.05;
};

struct ChowResult {
    TestResult break_point;
    TestResult sample_split;
    double break_point_critical = 0.0;  // bootstrap 95% quantile
    double sample_split_critical = 0.0;
};

namespace detail {

inline double log_det_spd(const Matrix& s) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("singular residual covariance in Chow test");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

struct ChowStats {
    double break_point;
    double sample_split;
};

// Break at row k: first sample y[0, k), second y[k, T).
inline ChowStats chow_statistics(const Matrix& y, std::size_t k, std::size_t p) {
    const auto T = static_cast<std::size_t>(y.rows());
    auto full = fit_var(y, p);
    auto first = fit_var(y.topRows(static_cast<Eigen::Index>(k)), p);
    auto second = fit_var(y.bottomRows(static_cast<Eigen::Index>(T - k)), p);
    const double t1 = static_cast<double>(k - p);
    const double t2 = static_cast<double>(T - k - p);
    const auto& u = full.residuals;  // row r <-> observation r + p
    Matrix ua = u.topRows(static_cast<Eigen::Index>(k - p));
    Matrix ub = u.bottomRows(static_cast<Eigen::Index>(T - k - p));
    Matrix pooled = (ua.transpose() * ua + ub.transpose() * ub) / (t1 + t2);
    const double ld_pooled = log_det_spd(pooled);
    const double ld1 = log_det_spd(first.residual_cov);
    const double ld2 = log_det_spd(second.residual_cov);
    Matrix mixed = (t1 * first.residual_cov + t2 * second.residual_cov) / (t1 + t2);
    ChowStats s;
    s.break_point = (t1 + t2) * ld_pooled - t1 * ld1 - t2 * ld2;
    s.sample_split = (t1 + t2) * (ld_pooled - log_det_spd(mixed));
    return s;
}

inline double upper_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Break-point and sample-split statistics with residual-bootstrap p-values.
inline ChowResult chow_test(const Matrix& y, std::size_t break_index, const ChowOptions& opt = {}) {
    const auto T = static_cast<std::size_t>(y.rows());
    const auto n = static_cast<std::size_t>(y.cols());
    const std::size_t p = opt.lag;
    const std::size_t min_len = p + n * p + 1 + n;
    if (break_index < min_len || T - break_index < min_len)
        throw InvalidInput("Chow test half too short to fit VAR(" + std::to_string(p) + ")");
    if (opt.bootstrap_reps < 19) throw InvalidInput("Chow bootstrap needs at least 19 replications");

    const auto observed = detail::chow_statistics(y, break_index, p);
    const auto model = fit_var(y, p);
    Matrix centered = model.residuals.rowwise() - model.residuals.colwise().mean();

    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, centered.rows() - 1);
    std::vector<double> bp, ss;
    std::size_t bp_exceed = 0, ss_exceed = 0;
    Matrix ystar(y.rows(), y.cols());
    for (std::size_t b = 0; b < opt.bootstrap_reps; ++b) {
        ystar.topRows(static_cast<Eigen::Index>(p)) = y.topRows(static_cast<Eigen::Index>(p));
        for (auto t = static_cast<Eigen::Index>(p); t < y.rows(); ++t) {
            Vector row = model.intercept + centered.row(pick(rng)).transpose();
            for (std::size_t j = 1; j <= p; ++j)
                row.noalias() += model.coefficients[j - 1] * ystar.row(t - static_cast<Eigen::Index>(j)).transpose();
            ystar.row(t) = row.transpose();
        }
        auto s = detail::chow_statistics(ystar, break_index, p);
        bp.push_back(s.break_point);
        ss.push_back(s.sample_split);
        if (s.break_point >= observed.break_point) ++bp_exceed;
        if (s.sample_split >= observed.sample_split) ++ss_exceed;
    }
    const double denom = static_cast<double>(opt.bootstrap_reps + 1);
    ChowResult out;
    out.break_point = make_result(observed.break_point, static_cast<double>(bp_exceed + 1) / denom, p, opt.level);
    out.sample_split = make_result(observed.sample_split, static_cast<double>(ss_exceed + 1) / denom, p, opt.level);
    out.break_point_critical = detail::upper_quantile(bp, 0.95);
    out.sample_split_critical = detail::upper_quantile(ss, 0.95);
    return out;
}

inline ChowResult chow_test(const ReturnsPanel& returns, const EventSplit& split, const ChowOptions& opt = {}) {
    if (split.before.length() + split.after.length() != returns.length())
        throw InvalidInput("event split does not partition the panel");
    return chow_test(returns.values(), split.before.length(), opt);
}

}  // namespace spillover
