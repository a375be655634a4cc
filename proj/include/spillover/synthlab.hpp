#pragma once

// Seeded synthetic VAR data and Monte-Carlo oracles with known ground truth.
//
// Random streams: a master seed is expanded with splitmix64; replication k
// draws from std::mt19937_64 seeded by (splitmix64(master), k). Results are
// reproducible within one standard library, not bit-identical across them.

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"
#include "spillover/panel.hpp"
#include "spillover/var.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace spillover::synth {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent generator for replication `stream` under `master`.
inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(master)),
                      static_cast<std::uint32_t>(splitmix64(master) >> 32),
                      static_cast<std::uint32_t>(splitmix64(master ^ splitmix64(stream + 1))),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

enum class Scenario { custom, one_way_transmitter, block_independent, regime_change };

inline std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::custom: return "custom";
        case Scenario::one_way_transmitter: return "one_way_transmitter";
        case Scenario::block_independent: return "block_independent";
        case Scenario::regime_change: return "regime_change";
    }
    return "custom";
}

inline Scenario parse_scenario(const std::string& s) {
    if (s == "custom") return Scenario::custom;
    if (s == "one_way_transmitter") return Scenario::one_way_transmitter;
    if (s == "block_independent") return Scenario::block_independent;
    if (s == "regime_change") return Scenario::regime_change;
    throw InvalidInput("unknown scenario '" + s + "'");
}

struct SynthSpec {
    std::vector<Matrix> coefficients;  // phi_1..phi_p, N x N
    Vector intercept;                  // empty = zero
    Matrix innovation_cov;
    std::size_t length = 1000;
    std::uint64_t seed = 1;
    Scenario scenario = Scenario::custom;
    // regime_change: from row `regime_index` on, coefficients are multiplied by
    // `regime_coef_scale` and innovations by sqrt(`regime_cov_scale`).
    std::size_t regime_index = 0;
    double regime_coef_scale = 1.0;
    double regime_cov_scale = 1.0;
    std::size_t burn_in = 500;
    bool allow_explosive = false;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(innovation_cov.rows()); }
    [[nodiscard]] std::size_t lag() const { return coefficients.size(); }
};

/// Lower-triangular factor L with L L' = cov (eigen square root if not PD).
inline Matrix covariance_factor(const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(cov));
    if (es.eigenvalues().minCoeff() < -1e-10) throw InvalidInput("innovation covariance is not SPSD");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline void validate(const SynthSpec& spec) {
    const auto n = static_cast<Eigen::Index>(spec.dim());
    if (n == 0 || spec.innovation_cov.cols() != n) throw InvalidInput("innovation covariance must be square and nonempty");
    if (spec.coefficients.empty()) throw InvalidInput("synthetic spec needs at least one lag matrix");
    for (const auto& c : spec.coefficients)
        if (c.rows() != n || c.cols() != n) throw InvalidInput("coefficient matrix has the wrong shape");
    if (spec.intercept.size() != 0 && spec.intercept.size() != n) throw InvalidInput("intercept has the wrong length");
    if (spec.length < 2) throw InvalidInput("synthetic length must be at least 2");
    if (!spec.allow_explosive) {
        double rho = spectral_radius(spec.coefficients);
        if (rho >= 1.0)
            throw InvalidInput("explosive synthetic spec (spectral radius " + std::to_string(rho) + ")");
        if (spec.scenario == Scenario::regime_change) {
            std::vector<Matrix> scaled;
            for (const auto& c : spec.coefficients) scaled.push_back(c * spec.regime_coef_scale);
            if (spectral_radius(scaled) >= 1.0) throw InvalidInput("explosive post-regime coefficients");
        }
    }
    (void)covariance_factor(spec.innovation_cov);
}

/// T x N draw from the spec; the first `burn_in` steps are discarded.
inline Matrix simulate_var(const SynthSpec& spec) {
    validate(spec);
    const auto n = static_cast<Eigen::Index>(spec.dim());
    const std::size_t p = spec.lag();
    const Matrix L = covariance_factor(spec.innovation_cov);
    const Vector d = spec.intercept.size() ? spec.intercept : Vector::Zero(n);
    auto rng = make_stream(spec.seed);
    std::normal_distribution<double> z(0.0, 1.0);

    const std::size_t total = spec.burn_in + spec.length;
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(total), n);
    Vector e(n);
    for (std::size_t t = 0; t < total; ++t) {
        const bool post = spec.scenario == Scenario::regime_change && t >= spec.burn_in + spec.regime_index;
        const double cs = post ? spec.regime_coef_scale : 1.0;
        const double vs = post ? std::sqrt(spec.regime_cov_scale) : 1.0;
        for (Eigen::Index i = 0; i < n; ++i) e(i) = z(rng);
        Vector row = d + vs * (L * e);
        for (std::size_t j = 1; j <= std::min(p, t); ++j)
            row.noalias() += cs * spec.coefficients[j - 1] * y.row(static_cast<Eigen::Index>(t - j)).transpose();
        y.row(static_cast<Eigen::Index>(t)) = row.transpose();
    }
    Matrix out = y.bottomRows(static_cast<Eigen::Index>(spec.length));
    if (!out.allFinite()) throw NumericalError("synthetic path diverged");
    return out;
}

/// Wraps a simulated draw as a returns panel on consecutive weekdays.
inline ReturnsPanel simulate_panel(const SynthSpec& spec, const std::vector<std::string>& ids = {},
                                   const Date& start = Date(2010, 1, 5)) {
    Matrix y = simulate_var(spec);
    std::vector<SeriesMeta> meta;
    for (std::size_t i = 0; i < spec.dim(); ++i) {
        SeriesMeta m;
        m.id = i < ids.size() ? ids[i] : "S" + std::to_string(i + 1);
        meta.push_back(m);
    }
    return ReturnsPanel(weekday_sequence(start, spec.length), std::move(y), std::move(meta));
}

// ---------------------------------------------------------------------------
// Scenario builders
// ---------------------------------------------------------------------------

/// Series 0 loads onto every other series; no feedback.
inline SynthSpec one_way_transmitter(std::size_t n, double own = 0.3, double strength = 0.4) {
    SynthSpec s;
    s.scenario = Scenario::one_way_transmitter;
    Matrix phi = own * Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(n); ++i) phi(i, 0) = strength;
    s.coefficients = {phi};
    s.innovation_cov = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    return s;
}

/// Two blocks coupled internally, independent of each other.
inline SynthSpec block_independent(std::size_t n, double own = 0.3, double coupling = 0.2, double corr = 0.3) {
    SynthSpec s;
    s.scenario = Scenario::block_independent;
    const auto N = static_cast<Eigen::Index>(n);
    const Eigen::Index half = N / 2;
    Matrix phi = own * Matrix::Identity(N, N);
    Matrix cov = Matrix::Identity(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            if (i != j && (i < half) == (j < half)) {
                phi(i, j) = coupling;
                cov(i, j) = corr;
            }
    s.coefficients = {phi};
    s.innovation_cov = cov;
    return s;
}

/// iid pair (long, short) with short ~ N(0, 1) and long = beta * short + e,
/// e ~ N(0, idio_var); from row `regime_index` on, Var(e) is scaled by
/// `idio_scale`. The hedge correlation therefore drops when idio_scale > 1.
inline ReturnsPanel factor_pair(std::size_t length, double beta, double idio_var, std::uint64_t seed,
                                std::size_t regime_index = 0, double idio_scale = 1.0,
                                const std::vector<std::string>& ids = {"LONG", "SHORT"}) {
    if (length < 2) throw InvalidInput("synthetic length must be at least 2");
    if (!(idio_var >= 0.0) || !(idio_scale >= 0.0)) throw InvalidInput("idiosyncratic variance must be non-negative");
    if (ids.size() != 2) throw InvalidInput("factor pair needs two ids");
    auto rng = make_stream(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix y(static_cast<Eigen::Index>(length), 2);
    for (std::size_t t = 0; t < length; ++t) {
        const double sd = std::sqrt(idio_var * (t >= regime_index && regime_index > 0 ? idio_scale : 1.0));
        const double f = z(rng);
        const double e = z(rng);
        y(static_cast<Eigen::Index>(t), 0) = beta * f + sd * e;
        y(static_cast<Eigen::Index>(t), 1) = f;
    }
    std::vector<SeriesMeta> meta(2);
    meta[0].id = ids[0];
    meta[1].id = ids[1];
    return ReturnsPanel(weekday_sequence(Date(2010, 1, 5), length), std::move(y), std::move(meta));
}

// ---------------------------------------------------------------------------
// Monte-Carlo generalized FEVD oracle
// ---------------------------------------------------------------------------

struct FevdEstimate {
    Matrix share;      // row-standardized, percent
    Matrix std_error;  // per cell, percent
};

/// Simulates h-step forecast errors of the simulated VAR and estimates each
/// cell as the share of forecast-error variance explained by conditioning on
/// the path of one variable's shocks. No moving-average matrices are formed.
inline FevdEstimate mc_fevd_oracle(const SynthSpec& spec, std::size_t h, std::size_t reps, std::uint64_t seed = 99,
                                   std::size_t batches = 20) {
    validate(spec);
    if (reps < 100) throw InvalidInput("Monte-Carlo FEVD oracle needs at least 100 replications");
    if (h == 0) throw InvalidInput("horizon must be positive");
    const auto n = static_cast<Eigen::Index>(spec.dim());
    const std::size_t p = spec.lag();
    const Matrix L = covariance_factor(spec.innovation_cov);
    auto rng = make_stream(seed, 0xFEFDULL);
    std::normal_distribution<double> z(0.0, 1.0);

    batches = std::max<std::size_t>(2, std::min(batches, reps / 50));
    const std::size_t per_batch = reps / batches;

    // Accumulators per batch: cross[s](i, j) = sum FE_i * eps_{j,s}, fe2(i), eps2(j).
    std::vector<Matrix> batch_share;
    std::vector<Matrix> cross_all(h, Matrix::Zero(n, n));
    Vector fe2_all = Vector::Zero(n), eps2_all = Vector::Zero(n);

    Matrix eps(n, static_cast<Eigen::Index>(h));
    Matrix path(n, static_cast<Eigen::Index>(h));
    Vector e(n);
    auto finish = [&](const std::vector<Matrix>& cross, const Vector& fe2, const Vector& eps2, double count) {
        Matrix theta(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                double num = 0.0;
                for (std::size_t s = 0; s < h; ++s) {
                    const double c = cross[s](i, j) / count;
                    num += c * c;
                }
                theta(i, j) = num / (eps2(j) / (count * static_cast<double>(h))) / (fe2(i) / count);
            }
        Vector rows = theta.rowwise().sum();
        return Matrix(100.0 * rows.cwiseInverse().asDiagonal() * theta);
    };

    for (std::size_t b = 0; b < batches; ++b) {
        std::vector<Matrix> cross(h, Matrix::Zero(n, n));
        Vector fe2 = Vector::Zero(n), eps2 = Vector::Zero(n);
        for (std::size_t r = 0; r < per_batch; ++r) {
            for (std::size_t s = 0; s < h; ++s) {
                for (Eigen::Index i = 0; i < n; ++i) e(i) = z(rng);
                eps.col(static_cast<Eigen::Index>(s)) = L * e;
            }
            for (std::size_t s = 0; s < h; ++s) {
                Vector y = eps.col(static_cast<Eigen::Index>(s));
                for (std::size_t j = 1; j <= std::min(p, s); ++j)
                    y.noalias() += spec.coefficients[j - 1] * path.col(static_cast<Eigen::Index>(s - j));
                path.col(static_cast<Eigen::Index>(s)) = y;
            }
            const Vector fe = path.col(static_cast<Eigen::Index>(h - 1));
            fe2.array() += fe.array().square();
            for (std::size_t s = 0; s < h; ++s) {
                cross[s].noalias() += fe * eps.col(static_cast<Eigen::Index>(s)).transpose();
                eps2.array() += eps.col(static_cast<Eigen::Index>(s)).array().square();
            }
        }
        batch_share.push_back(finish(cross, fe2, eps2, static_cast<double>(per_batch)));
        for (std::size_t s = 0; s < h; ++s) cross_all[s] += cross[s];
        fe2_all += fe2;
        eps2_all += eps2;
    }

    FevdEstimate out;
    out.share = finish(cross_all, fe2_all, eps2_all, static_cast<double>(per_batch * batches));
    Matrix mean = Matrix::Zero(n, n), sq = Matrix::Zero(n, n);
    for (const auto& m : batch_share) {
        mean += m;
        sq += m.cwiseProduct(m);
    }
    const double B = static_cast<double>(batch_share.size());
    mean /= B;
    Matrix var = (sq / B - mean.cwiseProduct(mean)) * (B / (B - 1.0));
    out.std_error = (var.cwiseMax(0.0) / B).cwiseSqrt();
    return out;
}

}  // namespace spillover::synth
