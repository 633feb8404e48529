#include "svsc/numerics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "svsc/errors.hpp"

namespace svsc::numerics {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double find_root(const std::function<double(double)>& f, double lo, double hi, double x_tol,
                 int max_iter) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (!std::isfinite(flo) || !std::isfinite(fhi) || (flo > 0.0) == (fhi > 0.0))
        throw NumericalError("find_root: root is not bracketed");
    boost::uintmax_t iters = static_cast<boost::uintmax_t>(max_iter);
    auto tol = [x_tol](double a, double b) { return std::abs(b - a) <= x_tol * (1.0 + std::abs(a)); };
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (r.first + r.second);
}

bool expand_bracket(const std::function<double(double)>& f, double& lo, double& hi, double min_lo,
                    double max_hi, int max_iter) {
    double flo = f(lo);
    double fhi = f(hi);
    for (int i = 0; i < max_iter; ++i) {
        if (std::isfinite(flo) && std::isfinite(fhi) && (flo > 0.0) != (fhi > 0.0)) return true;
        const double width = hi - lo;
        if (lo > min_lo) {
            lo = std::max(min_lo, lo - width);
            flo = f(lo);
        }
        if (hi < max_hi) {
            hi = std::min(max_hi, hi + width);
            fhi = f(hi);
        }
        if (lo <= min_lo && hi >= max_hi) break;
    }
    return std::isfinite(flo) && std::isfinite(fhi) && (flo > 0.0) != (fhi > 0.0);
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double* error_estimate) {
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &err);
    if (error_estimate) *error_estimate = err;
    return value;
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

}  // namespace svsc::numerics
