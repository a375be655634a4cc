#include "spillover/synthlab.hpp"
#include "spillover/var.hpp"

#include <gtest/gtest.h>

using namespace spillover;
using namespace spillover::synth;

namespace {

SynthSpec bivariate(std::uint64_t seed = 1) {
    SynthSpec s;
    Matrix phi(2, 2);
    phi << 0.5, 0.3, 0.0, 0.5;
    s.coefficients = {phi};
    s.innovation_cov = Matrix::Identity(2, 2);
    s.length = 1000;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Simulate, SameSeedIsBitIdentical) {
    auto s = bivariate(5);
    EXPECT_EQ(simulate_var(s), simulate_var(s));
    auto t = bivariate(6);
    EXPECT_NE(simulate_var(s), simulate_var(t));
    auto p = simulate_panel(s, {"A", "B"});
    EXPECT_EQ(p.values(), simulate_var(s));
    EXPECT_EQ(p.dates().front(), Date(2010, 1, 5));
}

TEST(Simulate, WhiteNoiseMoments) {
    SynthSpec s;
    s.coefficients = {Matrix::Zero(3, 3)};
    s.innovation_cov = Matrix::Identity(3, 3);
    s.length = 10000;
    s.seed = 77;
    Matrix cov = sample_cov(simulate_var(s));
    EXPECT_LT((cov - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Simulate, ExplosiveSpecNeedsOverride) {
    auto s = bivariate();
    s.coefficients = {Matrix::Identity(2, 2) * 1.05};
    EXPECT_THROW(simulate_var(s), InvalidInput);
    s.allow_explosive = true;
    s.burn_in = 0;
    s.length = 50;
    EXPECT_NO_THROW(simulate_var(s));
}

TEST(Simulate, MalformedSpecs) {
    auto s = bivariate();
    s.innovation_cov = Matrix::Identity(3, 3);
    EXPECT_THROW(simulate_var(s), InvalidInput);
    s = bivariate();
    s.coefficients.clear();
    EXPECT_THROW(simulate_var(s), InvalidInput);
    s = bivariate();
    s.innovation_cov(0, 0) = -1.0;
    EXPECT_THROW(simulate_var(s), InvalidInput);
    s = bivariate();
    s.scenario = Scenario::regime_change;
    s.regime_index = 500;
    s.regime_coef_scale = 2.0;
    EXPECT_THROW(simulate_var(s), InvalidInput);
}

TEST(Simulate, RefitWithinThreeStandardErrors) {
    auto s = bivariate();
    s.length = 1000;
    int inside = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        s.seed = seed;
        Matrix y = simulate_var(s);
        auto m = fit_var(y, 1);
        Matrix x = var_design(y, 1, 1);
        Matrix xtx_inv = (x.transpose() * x).inverse();
        for (Eigen::Index i = 0; i < 2; ++i)
            for (Eigen::Index j = 0; j < 2; ++j) {
                const double se = std::sqrt(m.residual_cov(i, i) * xtx_inv(1 + j, 1 + j));
                inside += std::abs(m.coefficients[0](i, j) - s.coefficients[0](i, j)) < 3.0 * se;
                ++total;
            }
    }
    EXPECT_GE(inside / static_cast<double>(total), 0.95);
}

TEST(Streams, DistinctAndReproducible) {
    auto a = make_stream(1, 0), b = make_stream(1, 1), c = make_stream(1, 0);
    const auto va = a(), vb = b(), vc = c();
    EXPECT_NE(va, vb);
    EXPECT_EQ(va, vc);
    EXPECT_NE(splitmix64(1), splitmix64(2));
}

TEST(Scenarios, BuildersAreStableAndTagged) {
    auto one = one_way_transmitter(4);
    EXPECT_EQ(one.scenario, Scenario::one_way_transmitter);
    EXPECT_LT(spectral_radius(one.coefficients), 1.0);
    for (Eigen::Index i = 1; i < 4; ++i) EXPECT_GT(one.coefficients[0](i, 0), 0.0);
    for (Eigen::Index j = 1; j < 4; ++j) EXPECT_EQ(one.coefficients[0](0, j), 0.0);
    auto blk = block_independent(4);
    EXPECT_LT(spectral_radius(blk.coefficients), 1.0);
    EXPECT_EQ(blk.coefficients[0](0, 2), 0.0);
    EXPECT_EQ(blk.innovation_cov(1, 3), 0.0);
    EXPECT_EQ(parse_scenario(to_string(Scenario::regime_change)), Scenario::regime_change);
    EXPECT_THROW(parse_scenario("bogus"), InvalidInput);
}

TEST(McOracle, DiagonalSystemHasNoCrossShares) {
    SynthSpec s;
    s.coefficients = {Vector::LinSpaced(3, 0.2, 0.6).asDiagonal()};
    s.innovation_cov = Matrix::Identity(3, 3);
    auto est = mc_fevd_oracle(s, 5, 20000);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
            if (i == j) continue;
            // Cell estimates are squared covariances, so they carry a positive
            // bias of order 1/reps on top of sampling noise.
            EXPECT_LT(est.share(i, j), 2.0 * est.std_error(i, j) + 0.05) << i << j;
        }
    EXPECT_TRUE(est.share.rowwise().sum().isApprox(Vector::Constant(3, 100.0)));
}

TEST(McOracle, OneStepIdentityCovariance) {
    auto s = bivariate();
    auto est = mc_fevd_oracle(s, 1, 50000);
    EXPECT_NEAR(est.share(0, 0), 100.0, 0.1);
    EXPECT_NEAR(est.share(1, 1), 100.0, 0.1);
}

TEST(McOracle, BivariateClosedForm) {
    // phi = [[0.5, 0.3], [0, 0.5]], Sigma = I, h = 10. With identity
    // covariance the generalized shares reduce to squared MA entries:
    // A_l = [[0.5^l, 0.6 l 0.5^l], [0, 0.5^l]].
    double a = 0.0, b = 0.0;
    for (int l = 0; l < 10; ++l) {
        const double d = std::pow(0.5, l);
        a += d * d;
        b += 0.36 * l * l * d * d;
    }
    const double expected_cross = b / (a + b);
    auto est = mc_fevd_oracle(bivariate(), 10, 100000);
    EXPECT_NEAR(est.share(0, 1) / 100.0, expected_cross, 1e-2);
    EXPECT_NEAR(est.share(1, 0) / 100.0, 0.0, 1e-2);
}

TEST(McOracle, StandardErrorShrinksWithReps) {
    auto s = bivariate();
    auto small = mc_fevd_oracle(s, 5, 1000, 3);
    auto mid = mc_fevd_oracle(s, 5, 10000, 3);
    auto big = mc_fevd_oracle(s, 5, 100000, 3);
    const double r1 = small.std_error(0, 1) / mid.std_error(0, 1);
    const double r2 = mid.std_error(0, 1) / big.std_error(0, 1);
    // Expected ratio sqrt(10) ~ 3.16; batch-means estimates are noisy.
    EXPECT_GT(r1, 1.8);
    EXPECT_LT(r1, 5.5);
    EXPECT_GT(r2, 1.8);
    EXPECT_LT(r2, 5.5);
    EXPECT_THROW(mc_fevd_oracle(s, 5, 99), InvalidInput);
}
