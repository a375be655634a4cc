#pragma once

// Small dense linear-algebra and distribution helpers shared across modules.

#include "spillover/common.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace spillover {

/// Least squares X B = Y by column-pivoted Householder QR.
/// Throws NumericalError when X is rank deficient.
inline Matrix least_squares(const Matrix& X, const Matrix& Y) {
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw NumericalError("singular regressor matrix (rank deficient design)");
    return qr.solve(Y);
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Symmetrizes and clamps negative eigenvalues to zero. `repaired` is set when
/// any eigenvalue had to be clamped.
inline Matrix spsd_repair(const Matrix& m, bool* repaired = nullptr) {
    Matrix s = symmetrize(m);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector& ev = es.eigenvalues();
    bool clamped = ev.size() > 0 && ev.minCoeff() < 0.0;
    if (repaired) *repaired = clamped;
    if (!clamped) return s;
    Vector fixed = ev.cwiseMax(0.0);
    Matrix out = es.eigenvectors() * fixed.asDiagonal() * es.eigenvectors().transpose();
    return symmetrize(out);
}

/// Population-normalized covariance of the rows of X (divides by rows).
inline Matrix cross_product_cov(const Matrix& X) {
    return (X.transpose() * X) / static_cast<double>(X.rows());
}

/// Sample covariance with n-1 normalization, columns are variables.
inline Matrix sample_cov(const Matrix& X) {
    Matrix c = X.rowwise() - X.colwise().mean();
    return (c.transpose() * c) / static_cast<double>(X.rows() - 1);
}

/// Upper tail of the chi-square distribution.
inline double chi2_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double mean(const Vector& x) { return x.mean(); }

inline double variance(const Vector& x) {
    const double m = x.mean();
    return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

inline double covariance(const Vector& x, const Vector& y) {
    return ((x.array() - x.mean()) * (y.array() - y.mean())).sum() / static_cast<double>(x.size() - 1);
}

inline double median(Vector x) {
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace spillover
