#pragma once

// Forecast-error variance decompositions and the connectedness index set
// (receiver/giver/net/pairwise measures, TCI) for static, TVP and rolling fits.

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"
#include "spillover/panel.hpp"
#include "spillover/tvp_var.hpp"
#include "spillover/var.hpp"

#include <Eigen/Cholesky>

#include <string>
#include <vector>

namespace spillover {

enum class FevdMethod { generalized, orthogonalized };

inline std::string to_string(FevdMethod m) { return m == FevdMethod::generalized ? "generalized" : "orthogonalized"; }

inline FevdMethod parse_fevd_method(const std::string& s) {
    if (s == "generalized") return FevdMethod::generalized;
    if (s == "orthogonalized") return FevdMethod::orthogonalized;
    throw InvalidInput("unknown FEVD method '" + s + "'");
}

struct FevdTable {
    std::size_t horizon = 1;
    Matrix raw;           // d_ij(h)
    Matrix table;         // l_ij(h): rows sum to 100
    bool stable = true;   // companion spectral radius < 1
};

struct ConnectednessSummary {
    Vector receiver;               // FROM others: sum_{j != i} l_ij
    Vector giver;                  // TO others: sum_{j != i} l_ji
    Vector net;                    // giver - receiver
    Vector inc_own;                // giver + l_ii
    std::vector<std::size_t> npt;  // #{j != i : l_ji > l_ij}
    double tci = 0.0;              // mean receiver, percent
};

/// MA matrices A_0 = I, A_l = sum_{j=1}^{min(l,p)} phi_j A_{l-j}, for l < h.
inline std::vector<Matrix> ma_matrices(const std::vector<Matrix>& phi, std::size_t h) {
    if (phi.empty()) throw InvalidInput("no coefficient matrices");
    const Eigen::Index n = phi.front().rows();
    std::vector<Matrix> a;
    a.reserve(h);
    a.push_back(Matrix::Identity(n, n));
    for (std::size_t l = 1; l < h; ++l) {
        Matrix m = Matrix::Zero(n, n);
        for (std::size_t j = 1; j <= std::min(l, phi.size()); ++j) m.noalias() += phi[j - 1] * a[l - j];
        if (!m.allFinite()) throw NumericalError("moving-average recursion overflowed at lag " + std::to_string(l));
        a.push_back(std::move(m));
    }
    return a;
}

/// h-step variance decomposition. Generalized shares are
/// d_ij = sigma_jj^-1 sum_l (e_i' A_l S e_j)^2 / sum_l e_i' A_l S A_l' e_i.
inline FevdTable gfevd(const std::vector<Matrix>& phi, const Matrix& cov, std::size_t h,
                       FevdMethod method = FevdMethod::generalized) {
    if (h == 0) throw InvalidInput("FEVD horizon must be at least 1");
    const Eigen::Index n = cov.rows();
    if (cov.cols() != n || phi.empty() || phi.front().rows() != n)
        throw InvalidInput("coefficient and covariance dimensions disagree");
    const Matrix S = spsd_repair(cov);
    if ((S.diagonal().array() <= 0.0).any()) throw NumericalError("zero innovation variance in FEVD");

    FevdTable out;
    out.horizon = h;
    out.stable = spectral_radius(phi) < 1.0;
    const auto a = ma_matrices(phi, h);

    Matrix num = Matrix::Zero(n, n);
    Vector den = Vector::Zero(n);
    if (method == FevdMethod::generalized) {
        for (const auto& al : a) {
            const Matrix as = al * S;
            num += as.array().square().matrix();
            den += (as * al.transpose()).diagonal();
        }
        num = num * S.diagonal().cwiseInverse().asDiagonal();
    } else {
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success) throw NumericalError("covariance not positive definite for Cholesky FEVD");
        const Matrix L = llt.matrixL();
        for (const auto& al : a) {
            const Matrix ap = al * L;
            num += ap.array().square().matrix();
            den += (al * S * al.transpose()).diagonal();
        }
    }
    out.raw = den.cwiseInverse().asDiagonal() * num;
    if (!out.raw.allFinite()) throw NumericalError("non-finite variance decomposition");
    const Vector rows = out.raw.rowwise().sum();
    out.table = 100.0 * rows.cwiseInverse().asDiagonal() * out.raw;
    return out;
}

inline FevdTable gfevd(const VarModel& model, std::size_t h, FevdMethod method = FevdMethod::generalized) {
    return gfevd(model.coefficients, model.residual_cov, h, method);
}

inline ConnectednessSummary summarize(const Matrix& l) {
    const Eigen::Index n = l.rows();
    ConnectednessSummary s;
    const Vector own = l.diagonal();
    s.receiver = l.rowwise().sum() - own;
    s.giver = l.colwise().sum().transpose() - own;
    s.net = s.giver - s.receiver;
    s.inc_own = s.giver + own;
    s.npt.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i && l(j, i) - l(i, j) > 0.0) ++s.npt[static_cast<std::size_t>(i)];
    s.tci = n > 0 ? s.receiver.mean() : 0.0;
    return s;
}

inline ConnectednessSummary summarize(const FevdTable& f) { return summarize(f.table); }

/// NPDC_{i<-j} = l_ij - l_ji.
inline Matrix npdc(const Matrix& l) {
    Matrix d = l - l.transpose();
    // Strict upper/lower mirroring makes antisymmetry exact in floating point.
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) d(i, j) = -d(j, i);
    }
    return d;
}

inline Matrix npdc(const FevdTable& f) { return npdc(f.table); }

enum StepFlag : unsigned {
    flag_none = 0,
    flag_covariance_repaired = 1,  // S_t was clamped back onto the SPSD cone
    flag_unstable = 2,             // companion spectral radius >= 1 at this step
};

struct DynamicSeries {
    std::size_t horizon = 10;
    std::vector<Date> dates;  // empty when the source carried no dates
    std::vector<Matrix> tables;
    std::vector<ConnectednessSummary> summaries;
    std::vector<Matrix> npdc;
    std::vector<unsigned> flags;
    Matrix average_table;     // time average of l over all steps
    ConnectednessSummary average;

    [[nodiscard]] std::size_t size() const noexcept { return summaries.size(); }

    [[nodiscard]] Vector tci() const {
        Vector v(static_cast<Eigen::Index>(size()));
        for (std::size_t k = 0; k < size(); ++k) v(static_cast<Eigen::Index>(k)) = summaries[k].tci;
        return v;
    }
};

namespace detail {

inline void push_step(DynamicSeries& out, const FevdTable& f, unsigned flags) {
    out.tables.push_back(f.table);
    out.summaries.push_back(summarize(f.table));
    out.npdc.push_back(npdc(f.table));
    out.flags.push_back(flags | (f.stable ? 0u : unsigned{flag_unstable}));
}

inline void finish_average(DynamicSeries& out) {
    if (out.tables.empty()) throw InvalidInput("no steps to average");
    Matrix sum = Matrix::Zero(out.tables.front().rows(), out.tables.front().cols());
    for (const auto& t : out.tables) sum += t;
    out.average_table = sum / static_cast<double>(out.tables.size());
    out.average = summarize(out.average_table);
}

}  // namespace detail

/// Decomposition at every post-burn-in step of a TVP path using (phi_t, S_t).
inline DynamicSeries dynamic_connectedness(const TvpPath& path, std::size_t h,
                                           FevdMethod method = FevdMethod::generalized) {
    if (path.size() <= path.burn_in) throw InvalidInput("TVP path shorter than its burn-in");
    DynamicSeries out;
    out.horizon = h;
    for (std::size_t k = path.burn_in; k < path.size(); ++k) {
        auto snap = path_slice(path, k);
        bool repaired = k < path.repaired.size() && path.repaired[k];
        bool again = false;
        Matrix S = spsd_repair(snap.covariance, &again);
        FevdTable f;
        try {
            f = gfevd(snap.coefficients, S, h, method);
        } catch (const NumericalError& e) {
            throw DivergenceError(std::string("connectedness failed: ") + e.what(), path.lag + k);
        }
        detail::push_step(out, f, (repaired || again) ? unsigned{flag_covariance_repaired} : 0u);
        if (k < path.dates.size()) out.dates.push_back(path.dates[k]);
    }
    detail::finish_average(out);
    return out;
}

/// Static VAR(p) refitted on each trailing window; one summary per window end.
inline DynamicSeries rolling_connectedness(const ReturnsPanel& returns, std::size_t window, std::size_t p,
                                           std::size_t h, FevdMethod method = FevdMethod::generalized) {
    const std::size_t T = returns.length();
    const std::size_t n = returns.width();
    if (window > T) throw InvalidInput("rolling window " + std::to_string(window) + " exceeds sample length " +
                                       std::to_string(T));
    if (window <= p || window - p <= n * p + 1)
        throw InvalidInput("rolling window " + std::to_string(window) + " too short for VAR(" + std::to_string(p) + ")");
    DynamicSeries out;
    out.horizon = h;
    const Matrix& y = returns.values();
    for (std::size_t end = window; end <= T; ++end) {
        auto model = fit_var(y.middleRows(static_cast<Eigen::Index>(end - window), static_cast<Eigen::Index>(window)), p);
        detail::push_step(out, gfevd(model, h, method), 0u);
        out.dates.push_back(returns.dates()[end - 1]);
    }
    detail::finish_average(out);
    return out;
}

}  // namespace spillover
