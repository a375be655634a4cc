#pragma once

// MacKinnon response-surface approximations for Dickey-Fuller type statistics.
//
// p-values use the 1994 asymptotic surfaces: a normal CDF of a polynomial in
// the tau statistic, with separate small-p and large-p fits. Critical values
// use the 2010 finite-sample surfaces. Only the constant-term case is tabulated
// for N = 1 (unit root) and N = 2 (two-variable cointegration).

#include "spillover/common.hpp"
#include "spillover/linalg.hpp"

#include <array>
#include <cmath>

namespace spillover::mackinnon {

namespace detail {

struct TauSurface {
    double tau_max;
    double tau_min;
    double tau_star;
    std::array<double, 3> small_p;  // ascending powers
    std::array<double, 4> large_p;  // ascending powers
};

// Constant-term case, N = 1 and N = 2.
inline constexpr std::array<TauSurface, 2> kConstant{{
    {2.74, -18.83, -1.61,
     {2.1659, 1.4412, 3.8269e-2},
     {1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2}},
    {0.92, -18.86, -2.62,
     {2.92, 1.5012, 3.9796e-2},
     {2.1945, 6.4695e-1, -2.9198e-1, -4.2377e-2}},
}};

// 2010 critical-value surfaces, constant term: rows 1%, 5%, 10%;
// cv = b0 + b1/T + b2/T^2 + b3/T^3.
inline constexpr std::array<std::array<std::array<double, 4>, 3>, 2> kCritConstant{{
    {{{-3.43035, -6.5393, -16.786, -79.433},
      {-2.86154, -2.8903, -4.234, -40.040},
      {-2.56677, -1.5384, -2.809, 0.0}}},
    {{{-3.89644, -10.9519, -33.527, 0.0},
      {-3.33613, -6.1101, -6.823, 0.0},
      {-3.04445, -4.2412, -2.720, 0.0}}},
}};

}  // namespace detail

/// Approximate p-value of a tau statistic (constant term), `n_series` in {1, 2}.
inline double pvalue(double tau, int n_series = 1) {
    if (n_series < 1 || n_series > 2) throw InvalidInput("MacKinnon surface only tabulated for N = 1, 2");
    const auto& s = detail::kConstant[static_cast<std::size_t>(n_series - 1)];
    if (tau > s.tau_max) return 1.0;
    if (tau < s.tau_min) return 0.0;
    double z = 0.0;
    if (tau <= s.tau_star) {
        z = s.small_p[0] + tau * (s.small_p[1] + tau * s.small_p[2]);
    } else {
        z = s.large_p[0] + tau * (s.large_p[1] + tau * (s.large_p[2] + tau * s.large_p[3]));
    }
    return normal_cdf(z);
}

struct CriticalValues {
    double one_pct;
    double five_pct;
    double ten_pct;
};

/// Finite-sample critical values for sample size `nobs` (0 = asymptotic).
inline CriticalValues critical_values(std::size_t nobs, int n_series = 1) {
    if (n_series < 1 || n_series > 2) throw InvalidInput("MacKinnon surface only tabulated for N = 1, 2");
    const auto& rows = detail::kCritConstant[static_cast<std::size_t>(n_series - 1)];
    auto eval = [&](const std::array<double, 4>& b) {
        if (nobs == 0) return b[0];
        const double inv = 1.0 / static_cast<double>(nobs);
        return b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]));
    };
    return {eval(rows[0]), eval(rows[1]), eval(rows[2])};
}

}  // namespace spillover::mackinnon
