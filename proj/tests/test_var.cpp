#include "spillover/synthlab.hpp"
#include "spillover/var.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace spillover;

namespace {

Matrix simulate(const std::vector<Matrix>& phi, std::size_t T, std::uint64_t seed, Matrix cov = Matrix()) {
    synth::SynthSpec spec;
    spec.coefficients = phi;
    const auto n = phi.front().rows();
    spec.innovation_cov = cov.size() ? cov : Matrix::Identity(n, n);
    spec.length = T;
    spec.seed = seed;
    return synth::simulate_var(spec);
}

Matrix random_spd(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix a(n, n);
    for (auto& v : a.reshaped()) v = z(rng);
    return a * a.transpose() + 0.1 * Matrix::Identity(n, n);
}

}  // namespace

TEST(FitVar, RecoversKnownCoefficients) {
    Matrix phi(3, 3);
    phi << 0.5, 0.1, 0.0, -0.2, 0.3, 0.1, 0.0, 0.2, 0.4;
    auto m = fit_var(simulate({phi}, 5000, 42), 1);
    EXPECT_LT((m.coefficients[0] - phi).cwiseAbs().maxCoeff(), 0.05);
    EXPECT_EQ(m.residuals.rows(), 4999);
    EXPECT_LT((m.residual_cov - m.residual_cov.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.residual_cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(FitVar, ReconstructsRegressand) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix y(300, 3);
    for (auto& v : y.reshaped()) v = z(rng);
    auto m = fit_var(y, 2);
    Matrix x = var_design(y, 2, 2);
    Matrix fitted = x * m.stacked();
    EXPECT_LT((fitted + m.residuals - y.bottomRows(298)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitVar, IidCoefficientsWithinThreeStandardErrors) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 1.0);
    int inside = 0, total = 0;
    for (int r = 0; r < 40; ++r) {
        Matrix y(2000, 3);
        for (auto& v : y.reshaped()) v = z(rng);
        auto m = fit_var(y, 1);
        Matrix x = var_design(y, 1, 1);
        Matrix xtx_inv = (x.transpose() * x).inverse();
        for (Eigen::Index i = 0; i < 3; ++i)
            for (Eigen::Index j = 0; j < 3; ++j) {
                const double se = std::sqrt(m.residual_cov(i, i) * xtx_inv(1 + j, 1 + j));
                inside += std::abs(m.coefficients[0](i, j)) < 3.0 * se;
                ++total;
            }
    }
    EXPECT_GE(inside / static_cast<double>(total), 0.98);
}

TEST(FitVar, Preconditions) {
    Matrix y = Matrix::Random(10, 3);
    EXPECT_THROW(fit_var(y, 3), InvalidInput);
    EXPECT_THROW(fit_var(y, 0), InvalidInput);
    Matrix dup = Matrix::Random(200, 3);
    dup.col(2) = dup.col(1);
    EXPECT_THROW(fit_var(dup, 1), NumericalError);
}

TEST(FitVar, Deterministic) {
    Matrix y = simulate({Matrix::Identity(2, 2) * 0.4}, 500, 5);
    auto a = fit_var(y, 2), b = fit_var(y, 2);
    EXPECT_EQ(a.stacked(), b.stacked());
    EXPECT_EQ(a.residual_cov, b.residual_cov);
}

TEST(SelectLag, RecoversVar1) {
    Matrix phi(2, 2);
    phi << 0.4, 0.1, 0.1, 0.3;
    int hits = 0;
    for (int r = 0; r < 30; ++r) hits += select_lag_bic(simulate({phi}, 2000, 100 + r), 6) == 1;
    EXPECT_GE(hits, 27);
}

TEST(SelectLag, RecoversStrongLagThree) {
    Matrix zero = Matrix::Zero(2, 2);
    Matrix phi3(2, 2);
    phi3 << 0.5, 0.2, 0.0, 0.5;
    int hits = 0;
    for (int r = 0; r < 30; ++r) hits += select_lag_bic(simulate({zero, zero, phi3}, 2000, 200 + r), 6) == 3;
    EXPECT_GE(hits, 24);
}

TEST(SelectLag, ExhaustedSample) {
    Matrix y = Matrix::Random(30, 3);
    EXPECT_THROW(select_lag_bic(y, 10), InvalidInput);
}

TEST(Correlations, BivariatePartialEqualsConditional) {
    std::mt19937_64 rng(7);
    for (int r = 0; r < 200; ++r) {
        Matrix s = random_spd(rng, 2);
        Matrix c = covariance_to_correlation(s);
        Matrix p = partial_correlation(c);
        EXPECT_NEAR(p(0, 1), c(0, 1), 1e-12);
        EXPECT_EQ(p(0, 0), 1.0);
    }
}

TEST(Correlations, DiagonalCovarianceGivesIdentity) {
    VarModel m;
    m.residual_cov = Vector::LinSpaced(4, 1.0, 4.0).asDiagonal();
    auto pair = residual_correlations(m);
    EXPECT_TRUE(pair.conditional.isApprox(Matrix::Identity(4, 4)));
    EXPECT_LT((pair.partial - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Correlations, SingularCovarianceRejectsPartial) {
    Matrix s(2, 2);
    s << 1.0, 1.0, 1.0, 1.0;
    EXPECT_THROW(partial_correlation(covariance_to_correlation(s)), NumericalError);
}

TEST(Correlations, InvariantToColumnRescaling) {
    std::mt19937_64 rng(3);
    Matrix cov = random_spd(rng, 4);
    Matrix y = simulate({Matrix::Identity(4, 4) * 0.2}, 800, 9, cov);
    auto a = residual_correlations(fit_var(y, 1));
    Vector scale(4);
    scale << 0.01, 3.0, 100.0, 0.5;
    auto b = residual_correlations(fit_var(y * scale.asDiagonal(), 1));
    EXPECT_LT((a.conditional - b.conditional).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.partial - b.partial).cwiseAbs().maxCoeff(), 1e-9);
    for (const Matrix* m : {&a.conditional, &a.partial}) {
        EXPECT_LT((*m - m->transpose()).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LE(m->cwiseAbs().maxCoeff(), 1.0);
        EXPECT_TRUE(m->diagonal().isOnes());
    }
    auto raw = return_correlations(y);
    EXPECT_TRUE(raw.conditional.diagonal().isOnes());
}

TEST(Stability, ClosedForms) {
    EXPECT_EQ(spectral_radius({Matrix::Zero(3, 3)}), 0.0);
    EXPECT_NEAR(spectral_radius({Matrix::Identity(3, 3) * 0.5}), 0.5, 1e-14);
    Matrix rot(2, 2);
    rot << 0.0, -0.9, 0.9, 0.0;
    EXPECT_NEAR(spectral_radius({rot}), 0.9, 1e-14);
    // x_t = 0.5 x_{t-2}: companion roots +-sqrt(0.5).
    EXPECT_NEAR(spectral_radius({Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.5)}), std::sqrt(0.5), 1e-14);
}

TEST(Stability, RescaledRandomDrawIsStable) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int r = 0; r < 100; ++r) {
        std::vector<Matrix> phi(2, Matrix(3, 3));
        for (auto& m : phi)
            for (auto& v : m.reshaped()) v = z(rng);
        const double rho = spectral_radius(phi);
        const double target = 0.95;
        // Scaling phi_j by c^j scales every companion root by c.
        const double c = target / rho;
        phi[0] *= c;
        phi[1] *= c * c;
        EXPECT_NEAR(spectral_radius(phi), target, 1e-9);
        VarModel m;
        m.coefficients = phi;
        EXPECT_LT(stability_check(m), 1.0);
    }
}

TEST(Stacking, RoundTrip) {
    VarModel m;
    m.lag = 2;
    m.intercept = Vector::LinSpaced(3, 1, 3);
    m.coefficients = {Matrix::Random(3, 3), Matrix::Random(3, 3)};
    Vector d;
    std::vector<Matrix> c;
    unstack_coefficients(m.stacked(), 2, d, c);
    EXPECT_EQ(d, m.intercept);
    EXPECT_EQ(c[0], m.coefficients[0]);
    EXPECT_EQ(c[1], m.coefficients[1]);
    EXPECT_THROW(unstack_coefficients(Matrix::Zero(5, 3), 2, d, c), InvalidInput);
}
