#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>

namespace svsc::numerics {

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p);

// Root of f on [lo, hi]; f(lo) and f(hi) must bracket. Throws NumericalError otherwise.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double x_tol = 1e-14, int max_iter = 200);

// Expands [lo, hi] geometrically (staying inside [min_lo, max_hi]) until f changes sign.
// Returns false if no bracket is found.
bool expand_bracket(const std::function<double(double)>& f, double& lo, double& hi,
                    double min_lo, double max_hi, int max_iter = 60);

// Adaptive Gauss-Kronrod on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10, double* error_estimate = nullptr);

// Pairwise sum; ordering is fixed so results do not depend on how the input was produced.
double pairwise_sum(const double* x, std::size_t n);

}  // namespace svsc::numerics
