#pragma once

// Hedge ratios and hedging effectiveness from conditional covariance paths,
// on the full sample and on event splits.
//
// Every source dates h_t at the last return it uses, so h_t is built from
// information through t:
//   tvp_residual   S_t of a TVP-VAR fit (post burn-in steps)
//   ewma           h_t = lambda h_{t-1} + (1 - lambda) r_t r_t', h_{-1} = initializer
//   rolling        sample covariance of rows (t - w, t]
//   static_sample  full-sample covariance at every t

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"
#include "spillover/panel.hpp"
#include "spillover/tvp_var.hpp"

#include <string>
#include <utility>
#include <vector>

namespace spillover {

enum class CovSource { tvp_residual, ewma, rolling, static_sample };

inline std::string to_string(CovSource s) {
    switch (s) {
        case CovSource::tvp_residual: return "tvp_residual";
        case CovSource::ewma: return "ewma";
        case CovSource::rolling: return "rolling";
        case CovSource::static_sample: return "static_sample";
    }
    return "unknown";
}

inline CovSource parse_cov_source(const std::string& s) {
    if (s == "tvp_residual") return CovSource::tvp_residual;
    if (s == "ewma") return CovSource::ewma;
    if (s == "rolling") return CovSource::rolling;
    if (s == "static_sample") return CovSource::static_sample;
    throw InvalidInput("unknown covariance source '" + s + "'");
}

struct CovSourceConfig {
    CovSource source = CovSource::tvp_residual;
    double lambda = 0.94;
    std::size_t ewma_init = 30;  // rows whose cross-product seeds the EWMA recursion
    std::size_t window = 120;
    TvpConfig tvp;

    void validate() const {
        if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidInput("EWMA decay must lie in (0, 1]");
        if (ewma_init == 0) throw InvalidInput("EWMA initializer needs at least one row");
        if (window < 2) throw InvalidInput("rolling covariance window must be at least 2");
        tvp.validate();
    }
};

struct CondCovSeries {
    CovSource source = CovSource::tvp_residual;
    std::vector<std::string> ids;
    std::vector<Date> dates;
    std::vector<Matrix> cov;  // h_t, N x N, SPSD
    Matrix returns;           // the return rows aligned with `dates`

    [[nodiscard]] std::size_t size() const noexcept { return cov.size(); }

    [[nodiscard]] Matrix average() const {
        if (cov.empty()) throw InvalidInput("empty covariance series");
        Matrix s = Matrix::Zero(cov.front().rows(), cov.front().cols());
        for (const auto& h : cov) s += h;
        return s / static_cast<double>(cov.size());
    }
};

namespace detail {

inline void push_cov(CondCovSeries& out, const ReturnsPanel& r, std::size_t t, const Matrix& h) {
    out.dates.push_back(r.dates()[t]);
    out.cov.push_back(spsd_repair(h));
}

inline void finish_cov(CondCovSeries& out, const ReturnsPanel& r, std::size_t first) {
    out.ids = r.ids();
    out.returns = r.values().bottomRows(static_cast<Eigen::Index>(r.length() - first));
}

}  // namespace detail

/// Covariance path from an already fitted TVP-VAR; `returns` must be the panel it was fitted on.
inline CondCovSeries conditional_cov_series(const ReturnsPanel& returns, const TvpPath& path) {
    if (path.dim() != returns.width() || path.size() + path.lag != returns.length())
        throw InvalidInput("TVP path does not match the returns panel");
    if (path.size() <= path.burn_in) throw InvalidInput("TVP path shorter than its burn-in");
    CondCovSeries out;
    out.source = CovSource::tvp_residual;
    const std::size_t first = path.lag + path.burn_in;
    for (std::size_t k = path.burn_in; k < path.size(); ++k) detail::push_cov(out, returns, path.lag + k, path.covariances[k]);
    detail::finish_cov(out, returns, first);
    return out;
}

inline CondCovSeries conditional_cov_series(const ReturnsPanel& returns, const CovSourceConfig& cfg = {}) {
    cfg.validate();
    const std::size_t T = returns.length();
    const Matrix& y = returns.values();
    CondCovSeries out;
    out.source = cfg.source;
    switch (cfg.source) {
        case CovSource::tvp_residual:
            return conditional_cov_series(returns, fit_tvp_var(returns, cfg.tvp));
        case CovSource::ewma: {
            if (cfg.ewma_init > T) throw InvalidInput("EWMA initializer longer than the sample");
            Matrix h = cross_product_cov(y.topRows(static_cast<Eigen::Index>(cfg.ewma_init)));
            for (std::size_t t = 0; t < T; ++t) {
                if (cfg.lambda < 1.0) {
                    const auto r = y.row(static_cast<Eigen::Index>(t));
                    h = cfg.lambda * h + (1.0 - cfg.lambda) * (r.transpose() * r);
                }
                detail::push_cov(out, returns, t, h);
            }
            detail::finish_cov(out, returns, 0);
            return out;
        }
        case CovSource::rolling: {
            if (cfg.window > T)
                throw InvalidInput("rolling covariance window " + std::to_string(cfg.window) + " exceeds sample length " +
                                   std::to_string(T));
            for (std::size_t t = cfg.window - 1; t < T; ++t)
                detail::push_cov(out, returns, t,
                                 sample_cov(y.middleRows(static_cast<Eigen::Index>(t + 1 - cfg.window),
                                                         static_cast<Eigen::Index>(cfg.window))));
            detail::finish_cov(out, returns, cfg.window - 1);
            return out;
        }
        case CovSource::static_sample: {
            if (T < 2) throw InvalidInput("static covariance needs at least two rows");
            const Matrix h = sample_cov(y);
            for (std::size_t t = 0; t < T; ++t) detail::push_cov(out, returns, t, h);
            detail::finish_cov(out, returns, 0);
            return out;
        }
    }
    throw InvalidInput("unknown covariance source");
}

/// Minimum-variance ratio Cov(c, f) / Var(f) on return vectors.
inline double hedge_ratio_mv(const Vector& c, const Vector& f) {
    if (c.size() != f.size()) throw InvalidInput("hedge legs have different lengths");
    if (c.size() < 2) throw InvalidInput("hedge ratio needs at least two observations");
    const double v = variance(f);
    if (!(v > 0.0)) throw InvalidInput("hedge leg has zero variance");
    return covariance(c, f) / v;
}

/// verbatim: h_{long,short} / h_{long}; textbook: h_{long,short} / h_{short}.
enum class HedgeForm { verbatim, textbook };

inline std::string to_string(HedgeForm f) { return f == HedgeForm::verbatim ? "verbatim" : "textbook"; }

inline HedgeForm parse_hedge_form(const std::string& s) {
    if (s == "verbatim") return HedgeForm::verbatim;
    if (s == "textbook") return HedgeForm::textbook;
    throw InvalidInput("unknown hedge ratio form '" + s + "'");
}

struct HedgePair {
    std::string long_id;
    std::string short_id;
    HedgeForm form = HedgeForm::verbatim;
    std::vector<Date> dates;
    Vector hr;                    // hr_t
    double hr_mean = 0.0;         // headline ratio
    double he = 0.0;              // 1 - Var(hedged) / h_u
    double h_u = 0.0;             // Var(long), the unhedged variance
    double hedged_variance = 0.0;
};

inline HedgePair hedge_pair(const std::string& long_id, const std::string& short_id, const CondCovSeries& cov,
                            HedgeForm form = HedgeForm::verbatim) {
    auto index = [&](const std::string& id) {
        for (std::size_t i = 0; i < cov.ids.size(); ++i)
            if (cov.ids[i] == id) return static_cast<Eigen::Index>(i);
        throw InvalidInput("unknown series '" + id + "' in hedge pair");
    };
    const Eigen::Index l = index(long_id);
    const Eigen::Index s = index(short_id);
    const auto T = static_cast<Eigen::Index>(cov.size());
    if (T < 2) throw InvalidInput("hedge pair needs at least two dated covariances");
    const Eigen::Index d = form == HedgeForm::verbatim ? l : s;

    HedgePair out;
    out.long_id = long_id;
    out.short_id = short_id;
    out.form = form;
    out.dates = cov.dates;
    out.hr.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Matrix& h = cov.cov[static_cast<std::size_t>(t)];
        if (!(h(d, d) > 1e-14 * h.diagonal().maxCoeff()))
            throw InvalidInput("zero conditional variance of '" + cov.ids[static_cast<std::size_t>(d)] + "' on " +
                               cov.dates[static_cast<std::size_t>(t)].str());
        out.hr(t) = h(l, s) / h(d, d);
    }
    const Vector longs = cov.returns.col(l);
    const Vector hedged = longs - out.hr.cwiseProduct(cov.returns.col(s));
    out.hr_mean = out.hr.mean();
    out.h_u = variance(longs);
    if (!(out.h_u > 1e-14 * variance(cov.returns.col(s)))) throw InvalidInput("long leg '" + long_id + "' has zero variance");
    out.hedged_variance = variance(hedged);
    out.he = 1.0 - out.hedged_variance / out.h_u;
    return out;
}

using PairList = std::vector<std::pair<std::string, std::string>>;

/// Both orientations of every unordered pair of series, in panel order.
inline PairList all_pairs(const std::vector<std::string>& ids) {
    PairList out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < ids.size(); ++j)
            if (i != j) out.emplace_back(ids[i], ids[j]);
    return out;
}

inline std::vector<HedgePair> hedge_pairs(const PairList& pairs, const CondCovSeries& cov,
                                          HedgeForm form = HedgeForm::verbatim) {
    std::vector<HedgePair> out;
    out.reserve(pairs.size());
    for (const auto& [l, s] : pairs) out.push_back(hedge_pair(l, s, cov, form));
    return out;
}

struct HedgeReportSplit {
    Date split_date;
    std::vector<HedgePair> full;
    std::vector<HedgePair> before;
    std::vector<HedgePair> after;
};

/// Recomputes covariances and pairs independently on the full sample and on each half.
inline HedgeReportSplit event_comparison(const ReturnsPanel& returns, const PairList& pairs, const EventSplit& split,
                                         const CovSourceConfig& cfg = {}, HedgeForm form = HedgeForm::verbatim) {
    HedgeReportSplit out;
    out.split_date = split.split_date;
    out.full = hedge_pairs(pairs, conditional_cov_series(returns, cfg), form);
    out.before = hedge_pairs(pairs, conditional_cov_series(split.before, cfg), form);
    out.after = hedge_pairs(pairs, conditional_cov_series(split.after, cfg), form);
    return out;
}

}  // namespace spillover
