#include "spillover/qvar.hpp"
#include "spillover/synthlab.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace spillover;

namespace {

Vector normal_sample(std::size_t n, std::uint64_t seed) {
    auto rng = synth::make_stream(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = z(rng);
    return v;
}

double order_statistic(Vector v, double tau) {
    std::sort(v.begin(), v.end());
    const auto k = static_cast<Eigen::Index>(std::ceil(static_cast<double>(v.size()) * tau));
    return v(k - 1);
}

ReturnsPanel symmetric_panel(std::size_t length, std::uint64_t seed) {
    auto spec = synth::one_way_transmitter(3);
    spec.length = length;
    spec.seed = seed;
    return synth::simulate_panel(spec, {"A", "B", "C"});
}

}  // namespace

TEST(Pinball, LossDefinition) {
    Vector r(3);
    r << 2.0, -1.0, 0.0;
    EXPECT_DOUBLE_EQ(pinball_loss(r, 0.25), 0.5 + 0.75);
    EXPECT_DOUBLE_EQ(pinball_loss(r, 0.5), 1.5);
}

TEST(QuantileRegression, RejectsQuantileOutsideUnitInterval) {
    Matrix X = Matrix::Ones(10, 1);
    Vector y = Vector::LinSpaced(10, 0.0, 1.0);
    EXPECT_THROW(quantile_regression(X, y, 1.2), InvalidInput);
    EXPECT_THROW(quantile_regression(X, y, 0.0), InvalidInput);
    EXPECT_THROW(quantile_regression(X, y, 1.0), InvalidInput);
    EXPECT_THROW(quantile_regression(X, y, std::nan("")), InvalidInput);
    EXPECT_THROW(quantile_regression(X.topRows(1), y.head(1), 0.5), InvalidInput);
    EXPECT_THROW(quantile_regression(X, y.head(5), 0.5), InvalidInput);
    auto panel = symmetric_panel(200, 3);
    EXPECT_THROW(fit_quantile_var(panel, 1, 1.2), InvalidInput);
    EXPECT_THROW(fit_quantile_var(panel, 0, 0.5), InvalidInput);
}

TEST(QuantileRegression, InterceptOnlyMatchesOrderStatistic) {
    const Vector y = normal_sample(1001, 7);
    const Matrix X = Matrix::Ones(y.size(), 1);
    for (double tau : {0.05, 0.15, 0.3, 0.5, 0.77, 0.95}) {
        auto fit = quantile_regression(X, y, tau);
        EXPECT_NEAR(fit.beta(0), order_statistic(y, tau), 1e-6) << "tau " << tau;
        EXPECT_TRUE(fit.certified);
        EXPECT_TRUE(fit.converged);
    }
}

TEST(QuantileRegression, InterceptMonotoneInTau) {
    const Vector y = normal_sample(500, 11);
    const Matrix X = Matrix::Ones(y.size(), 1);
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 1; k < 100; ++k) {
        const double b = quantile_regression(X, y, k / 100.0).beta(0);
        EXPECT_GE(b, prev) << "tau " << k / 100.0;
        prev = b;
    }
}

TEST(QuantileRegression, ExactLinearDataIsRecovered) {
    Matrix X(50, 2);
    X.col(0).setOnes();
    X.col(1) = Vector::LinSpaced(50, -1.0, 1.0);
    const Vector y = 0.5 * X.col(0) - 2.0 * X.col(1);
    for (double tau : {0.1, 0.5, 0.9}) {
        auto fit = quantile_regression(X, y, tau);
        EXPECT_NEAR(fit.beta(0), 0.5, 1e-9);
        EXPECT_NEAR(fit.beta(1), -2.0, 1e-9);
        EXPECT_NEAR(fit.loss, 0.0, 1e-9);
    }
}

TEST(QuantileRegression, StrictModeThrowsOnIterationCap) {
    const Vector y = normal_sample(300, 5);
    Matrix X(300, 2);
    X.col(0).setOnes();
    X.col(1) = normal_sample(300, 6);
    QuantileSolverOptions opt;
    opt.max_iterations = 1;
    opt.exact_polish = false;
    opt.strict = true;
    EXPECT_THROW(quantile_regression(X, y, 0.3, Vector(), opt), NumericalError);
    opt.strict = false;
    auto capped = quantile_regression(X, y, 0.3, Vector(), opt);
    EXPECT_EQ(capped.iterations, 1u);
    EXPECT_FALSE(capped.converged);
    EXPECT_FALSE(capped.certified);
    // The basis exchange certifies the optimum even from a single IRLS step.
    opt.exact_polish = true;
    opt.strict = true;
    auto rescued = quantile_regression(X, y, 0.3, Vector(), opt);
    EXPECT_TRUE(rescued.certified);
    EXPECT_LE(rescued.loss, capped.loss);
    auto full = quantile_regression(X, y, 0.3);
    EXPECT_NEAR(rescued.loss, full.loss, 1e-9);
}

TEST(QuantileVar, MedianMatchesLeastSquaresOnSymmetricErrors) {
    auto panel = symmetric_panel(5000, 2024);
    auto ols = fit_var(panel, 1);
    auto q = fit_quantile_var(panel, 1, 0.5);
    EXPECT_TRUE(q.converged());
    EXPECT_LT((q.model.stacked() - ols.stacked()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(QuantileVar, PinballNeverWorseThanLeastSquares) {
    auto panel = symmetric_panel(1500, 99);
    const Matrix& y = panel.values();
    const Matrix X = var_design(y, 2, 2);
    const Matrix target = y.bottomRows(y.rows() - 2);
    const Matrix ls = fit_var(panel, 2).stacked();
    for (int k = 0; k < 10; ++k) {
        const double tau = 0.05 + 0.1 * k;
        auto q = fit_quantile_var(panel, 2, tau);
        for (Eigen::Index i = 0; i < y.cols(); ++i) {
            const double at_ls = pinball_loss(target.col(i) - X * ls.col(i), tau);
            const double at_q = pinball_loss(target.col(i) - X * q.model.stacked().col(i), tau);
            EXPECT_LE(at_q, at_ls) << "tau " << tau << " eq " << i;
            EXPECT_DOUBLE_EQ(q.fits[static_cast<std::size_t>(i)].loss, at_q);
        }
    }
}

TEST(QuantileVar, CovarianceProxyChoices) {
    auto panel = symmetric_panel(400, 8);
    auto q = fit_quantile_var(panel, 1, 0.5);
    const Matrix& r = q.model.residuals;
    EXPECT_LT((q.model.residual_cov - r.transpose() * r / static_cast<double>(r.rows())).cwiseAbs().maxCoeff(), 1e-12);
    auto alt = fit_quantile_var(panel.values(), 1, 0.5, QvarCovariance::least_squares_residual);
    EXPECT_LT((alt.model.residual_cov - fit_var(panel, 1).residual_cov).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(parse_qvar_covariance(to_string(QvarCovariance::least_squares_residual)),
              QvarCovariance::least_squares_residual);
    EXPECT_THROW(parse_qvar_covariance("bogus"), InvalidInput);
}

TEST(QvarGrid, DefaultGridHasTenRows) {
    auto g = default_quantile_grid();
    ASSERT_EQ(g.size(), 10u);
    EXPECT_DOUBLE_EQ(g.front(), 0.05);
    EXPECT_NEAR(g.back(), 0.95, 1e-12);
    for (std::size_t k = 1; k < g.size(); ++k) EXPECT_NEAR(g[k] - g[k - 1], 0.1, 1e-12);

    auto panel = symmetric_panel(300, 4);
    QvarGridConfig cfg;
    cfg.window = 120;
    cfg.stride = 60;
    auto res = qvar_connectedness_grid(panel, cfg);
    EXPECT_EQ(res.tci.rows(), 10);
    ASSERT_EQ(res.dates.size(), 4u);  // ends 120, 180, 240, 300
    EXPECT_EQ(res.tci.cols(), 4);
    EXPECT_EQ(res.dates.back(), panel.dates().back());
    ASSERT_EQ(res.net.size(), 3u);
    for (Eigen::Index q = 0; q < res.tci.rows(); ++q)
        for (Eigen::Index w = 0; w < res.tci.cols(); ++w) {
            EXPECT_GE(res.tci(q, w), 0.0);
            EXPECT_LT(res.tci(q, w), 100.0);
            double net = 0.0;
            for (const auto& m : res.net) net += m(q, w);
            EXPECT_NEAR(net, 0.0, 1e-9);
        }
}

TEST(QvarGrid, EveryCellSatisfiesConnectednessInvariants) {
    auto panel = symmetric_panel(260, 12);
    const Matrix& y = panel.values();
    QvarGridConfig cfg;
    cfg.quantiles = {0.1, 0.5, 0.9};
    cfg.window = 200;
    cfg.stride = 30;
    auto res = qvar_connectedness_grid(panel, cfg);
    for (std::size_t q = 0; q < cfg.quantiles.size(); ++q) {
        for (std::size_t w = 0; w < res.dates.size(); ++w) {
            const std::size_t end = std::min<std::size_t>(cfg.window + w * cfg.stride, y.rows());
            auto fit = fit_quantile_var(y.middleRows(static_cast<Eigen::Index>(end - cfg.window),
                                                     static_cast<Eigen::Index>(cfg.window)),
                                        1, cfg.quantiles[q]);
            auto f = gfevd(fit.model, cfg.horizon);
            EXPECT_LT((f.table.rowwise().sum().array() - 100.0).abs().maxCoeff(), 1e-9);
            auto s = summarize(f);
            EXPECT_NEAR(res.tci(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(w)), s.tci, 1e-6);
        }
    }
}

TEST(QvarGrid, SingleMedianMatchesRollingShape) {
    auto panel = symmetric_panel(240, 17);
    QvarGridConfig cfg;
    cfg.quantiles = {0.5};
    cfg.window = 120;
    auto res = qvar_connectedness_grid(panel, cfg);
    auto roll = rolling_connectedness(panel, 120, 1, 10);
    ASSERT_EQ(res.tci.rows(), 1);
    ASSERT_EQ(static_cast<std::size_t>(res.tci.cols()), roll.size());
    EXPECT_EQ(res.dates, roll.dates);
    // The median fit is a robust analog: close to, not equal to, least squares.
    const double gap = (res.tci.row(0).transpose() - roll.tci()).cwiseAbs().mean();
    EXPECT_LT(gap, 5.0);
}

TEST(QvarGrid, SymmetricAboutMedianOnSymmetricData) {
    auto panel = symmetric_panel(1200, 31);
    QvarGridConfig cfg;
    cfg.window = 120;
    cfg.stride = 20;
    auto res = qvar_connectedness_grid(panel, cfg);
    const Eigen::Index nq = res.tci.rows();
    for (Eigen::Index q = 0; q < nq / 2; ++q) {
        const double lo = res.tci.row(q).mean();
        const double hi = res.tci.row(nq - 1 - q).mean();
        EXPECT_LT(std::abs(lo - hi), 3.0) << "tau " << res.quantiles[static_cast<std::size_t>(q)];
    }
}

TEST(QvarGrid, ConfigValidation) {
    auto panel = symmetric_panel(200, 1);
    QvarGridConfig cfg;
    cfg.quantiles = {};
    EXPECT_THROW(qvar_connectedness_grid(panel, cfg), InvalidInput);
    cfg.quantiles = {0.5, 0.3};
    EXPECT_THROW(qvar_connectedness_grid(panel, cfg), InvalidInput);
    cfg.quantiles = {0.5, 1.0};
    EXPECT_THROW(qvar_connectedness_grid(panel, cfg), InvalidInput);
    cfg.quantiles = {0.5};
    cfg.window = 201;
    EXPECT_THROW(qvar_connectedness_grid(panel, cfg), InvalidInput);
    cfg.window = 4;
    EXPECT_THROW(qvar_connectedness_grid(panel, cfg), InvalidInput);
    cfg.window = 100;
    cfg.stride = 0;
    EXPECT_THROW(qvar_connectedness_grid(panel, cfg), InvalidInput);
}
