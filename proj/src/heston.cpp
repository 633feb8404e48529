#include "svsc/heston.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "svsc/errors.hpp"
#include "svsc/numerics.hpp"

namespace svsc {

using cplx = std::complex<double>;

double RateMarket::forward(double t) const { return spot * std::exp(drift() * t); }
double RateMarket::discount(double t) const { return std::exp(-rate_dom * t); }

void HestonParams::validate() const {
    for (double x : {beta, v_bar, v0, alpha, rho})
        if (!std::isfinite(x)) throw DomainError("HestonParams: non-finite parameter");
    if (!(beta > 0.0)) throw DomainError("HestonParams: beta must be positive");
    if (!(v_bar > 0.0)) throw DomainError("HestonParams: v_bar must be positive");
    if (!(v0 > 0.0)) throw DomainError("HestonParams: v0 must be positive");
    if (!(alpha >= 0.0)) throw DomainError("HestonParams: alpha must be non-negative");
    if (!(rho > -1.0 && rho < 1.0)) throw DomainError("HestonParams: rho must lie in (-1, 1)");
}

double HestonParams::expected_variance(double t) const {
    return v_bar + (v0 - v_bar) * std::exp(-beta * t);
}

double HestonParams::integrated_variance(double t) const {
    const double bt = beta * t;
    const double frac = bt < 1e-8 ? t * (1.0 - 0.5 * bt) : -std::expm1(-bt) / beta;
    return v_bar * t + (v0 - v_bar) * frac;
}

namespace {

// log(1 + z) / z, accurate for small |z|.
cplx log1p_over_z(cplx z) {
    if (std::abs(z) < 1e-4) return 1.0 - z / 2.0 + z * z / 3.0 - z * z * z / 4.0;
    return std::log(1.0 + z) / z;
}

// Upper integration limit where |integrand| has fallen below a negligible level.
template <class Magnitude>
double truncation_limit(Magnitude&& magnitude) {
    double u = 8.0;
    while (u < 2e5) {
        if (magnitude(u) < 1e-17 && magnitude(1.5 * u) < 1e-17) return u;
        u *= 1.5;
    }
    return u;
}

constexpr double kQuadTol = 1e-12;

}  // namespace

cplx heston_char_fn(const HestonParams& p, cplx u, double t) {
    const cplx i(0.0, 1.0);
    const double kappa = p.beta;
    const double sig = p.alpha;
    const cplx iu = i * u;
    const cplx q = iu + u * u;  // iu + u^2
    const cplx b = kappa - p.rho * sig * iu;
    const cplx d = std::sqrt(b * b + sig * sig * q);
    const cplx bpd = b + d;
    const cplx e = std::exp(-d * t);
    // (b - d) / sigma^2 and g / sigma^2 written without the sigma^2 cancellation.
    const cplx bmd_over_s2 = -q / bpd;
    const cplx g = -sig * sig * q / (bpd * bpd);
    const cplx D = bmd_over_s2 * (1.0 - e) / (1.0 - g * e);
    // log((1 - g e) / (1 - g)) / sigma^2 = log1p(z) / sigma^2 with z = g (1 - e) / (1 - g).
    const cplx z_over_s2 = (-q / (bpd * bpd)) * (1.0 - e) / (1.0 - g);
    const cplx z = sig * sig * z_over_s2;
    const cplx log_term_over_s2 = log1p_over_z(z) * z_over_s2;
    const cplx C = kappa * p.v_bar * (bmd_over_s2 * t - 2.0 * log_term_over_s2);
    return std::exp(C + D * p.v0);
}

double heston_vanilla_price(const HestonParams& p, const RateMarket& mkt, const Vanilla& opt) {
    p.validate();
    if (!(opt.strike > 0.0) || !(opt.expiry > 0.0) || !std::isfinite(opt.strike) || !std::isfinite(opt.expiry))
        throw DomainError("heston_vanilla_price: strike and expiry must be positive");
    if (!(mkt.spot > 0.0)) throw DomainError("heston_vanilla_price: spot must be positive");
    const double t = opt.expiry;
    const double fwd = mkt.forward(t);
    const double df = mkt.discount(t);
    const double k = std::log(opt.strike / fwd);
    const cplx half_i(0.0, 0.5);

    auto magnitude = [&](double u) { return std::abs(heston_char_fn(p, u - half_i, t)) / (u * u + 0.25); };
    const double upper = truncation_limit(magnitude);
    auto integrand = [&](double u) {
        const cplx val = std::exp(cplx(0.0, -u * k)) * heston_char_fn(p, u - half_i, t);
        return val.real() / (u * u + 0.25);
    };
    double err = 0.0;
    const double integral = numerics::integrate(integrand, 0.0, upper, kQuadTol, &err);
    if (!std::isfinite(integral) || err > 1e-8)
        throw NumericalError("heston_vanilla_price: quadrature did not converge (error estimate " +
                             std::to_string(err) + ")");
    const double call_undisc = fwd - std::sqrt(fwd * opt.strike) * integral / std::numbers::pi;
    double undisc = opt.kind == OptionKind::Call ? call_undisc : call_undisc - (fwd - opt.strike);
    const double intrinsic =
        std::max(opt.kind == OptionKind::Call ? fwd - opt.strike : opt.strike - fwd, 0.0);
    const double cap = opt.kind == OptionKind::Call ? fwd : opt.strike;
    undisc = std::clamp(undisc, intrinsic, cap);
    return df * undisc;
}

double heston_implied_vol(const HestonParams& p, const RateMarket& mkt, double strike, double expiry) {
    const double fwd = mkt.forward(expiry);
    const Vanilla opt{strike, expiry, strike >= fwd ? OptionKind::Call : OptionKind::Put};
    const double price = heston_vanilla_price(p, mkt, opt);
    return bs_implied_vol(price, mkt.with_vol(0.1), opt);
}

double heston_digital_price(const HestonParams& p, const RateMarket& mkt, const EuropeanDigital& dig) {
    p.validate();
    if (!(dig.strike > 0.0) || !(dig.expiry > 0.0))
        throw DomainError("heston_digital_price: strike and expiry must be positive");
    const double t = dig.expiry;
    const double fwd = mkt.forward(t);
    const double k = std::log(dig.strike / fwd);
    auto magnitude = [&](double u) { return std::abs(heston_char_fn(p, u, t)) / u; };
    const double upper = truncation_limit(magnitude);
    auto integrand = [&](double u) {
        const cplx val = std::exp(cplx(0.0, -u * k)) * heston_char_fn(p, u, t) / cplx(0.0, u);
        return val.real();
    };
    double err = 0.0;
    const double integral = numerics::integrate(integrand, 0.0, upper, kQuadTol, &err);
    if (!std::isfinite(integral) || err > 1e-8)
        throw NumericalError("heston_digital_price: quadrature did not converge");
    const double above = std::clamp(0.5 + integral / std::numbers::pi, 0.0, 1.0);
    return mkt.discount(t) * (dig.kind == DigitalKind::Above ? above : 1.0 - above);
}

namespace {

constexpr double kAlphaMax = 5.0;
constexpr double kRhoMax = 0.99;

struct FitFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    std::span<const VolQuote> quotes;
    RateMarket mkt;
    double beta;
    double fixed_alpha;  // negative: alpha is a free parameter
    int* evaluations;

    int inputs() const { return fixed_alpha < 0.0 ? 3 : 2; }
    int values() const { return static_cast<int>(quotes.size()); }

    HestonParams decode(const Eigen::VectorXd& x) const {
        HestonParams p;
        p.beta = beta;
        p.v_bar = p.v0 = std::exp(x[0]);
        if (fixed_alpha < 0.0) {
            p.alpha = kAlphaMax / (1.0 + std::exp(-x[1]));
            p.rho = kRhoMax * std::tanh(x[2]);
        } else {
            p.alpha = fixed_alpha;
            p.rho = kRhoMax * std::tanh(x[1]);
        }
        return p;
    }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        ++*evaluations;
        const HestonParams p = decode(x);
        for (std::size_t i = 0; i < quotes.size(); ++i) {
            double r = 1.0;
            try {
                r = heston_implied_vol(p, mkt, quotes[i].strike, quotes[i].expiry) - quotes[i].vol;
            } catch (const std::exception&) {
                r = 1.0;
            }
            fvec[static_cast<Eigen::Index>(i)] = r;
        }
        return 0;
    }
};

double atm_quote_vol(std::span<const VolQuote> quotes, const RateMarket& mkt) {
    const double fwd = mkt.forward(quotes[0].expiry);
    auto it = std::min_element(quotes.begin(), quotes.end(), [fwd](const VolQuote& a, const VolQuote& b) {
        return std::abs(std::log(a.strike / fwd)) < std::abs(std::log(b.strike / fwd));
    });
    return it->vol;
}

double skew_sign(std::span<const VolQuote> quotes) {
    auto lo = std::min_element(quotes.begin(), quotes.end(),
                               [](const VolQuote& a, const VolQuote& b) { return a.strike < b.strike; });
    auto hi = std::max_element(quotes.begin(), quotes.end(),
                               [](const VolQuote& a, const VolQuote& b) { return a.strike < b.strike; });
    const double rr = hi->vol - lo->vol;
    return rr > 0.0 ? 1.0 : (rr < 0.0 ? -1.0 : 0.0);
}

void validate_quotes(std::span<const VolQuote> quotes, std::size_t min_count) {
    if (quotes.size() < min_count) throw DomainError("heston calibration: not enough quotes");
    for (const auto& q : quotes) {
        if (!(q.vol > 0.0) || !(q.strike > 0.0) || !(q.expiry > 0.0))
            throw DomainError("heston calibration: quotes need positive strike, vol and expiry");
        if (q.expiry != quotes[0].expiry) throw DomainError("heston calibration: quotes must share one expiry");
    }
    for (std::size_t i = 0; i < quotes.size(); ++i)
        for (std::size_t j = i + 1; j < quotes.size(); ++j)
            if (quotes[i].strike == quotes[j].strike)
                throw DomainError("heston calibration: quote strikes must be distinct");
}

CalibrationReport run_fit(const FitFunctor& fn, std::vector<Eigen::VectorXd> starts) {
    CalibrationReport best;
    best.max_abs_residual = std::numeric_limits<double>::infinity();
    Eigen::VectorXd fvec(fn.values());
    for (auto& x : starts) {
        Eigen::NumericalDiff<FitFunctor, Eigen::Central> nd(fn);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<FitFunctor, Eigen::Central>> lm(nd);
        lm.parameters.ftol = 1e-14;
        lm.parameters.xtol = 1e-12;
        lm.parameters.maxfev = 300;
        lm.minimize(x);
        fn(x, fvec);
        const double worst = fvec.cwiseAbs().maxCoeff();
        if (worst < best.max_abs_residual) {
            best.params = fn.decode(x);
            best.max_abs_residual = worst;
            for (int i = 0; i < std::min<int>(3, fn.values()); ++i) best.vol_residuals[i] = fvec[i];
        }
        if (best.max_abs_residual < 1e-7) break;
    }
    best.function_evaluations = *fn.evaluations;
    return best;
}

double logit_alpha(double a) { return std::log(a / (kAlphaMax - a)); }
double atanh_rho(double r) { return std::atanh(r / kRhoMax); }

}  // namespace

CalibrationReport heston_calibrate(std::span<const VolQuote> quotes, double beta, const RateMarket& mkt) {
    if (quotes.size() != 3) throw DomainError("heston_calibrate: exactly three quotes are required");
    validate_quotes(quotes, 3);
    if (!(beta > 0.0)) throw DomainError("heston_calibrate: beta must be positive");
    int evals = 0;
    FitFunctor fn{quotes, mkt, beta, -1.0, &evals};
    const double atm = atm_quote_vol(quotes, mkt);
    const double sgn = skew_sign(quotes);
    std::vector<Eigen::VectorXd> starts;
    for (auto [a, r] : {std::pair{0.3, 0.3 * sgn}, {0.1, 0.6 * sgn}, {0.8, 0.1 * sgn}, {1.5, 0.0}}) {
        Eigen::VectorXd x(3);
        x << std::log(atm * atm), logit_alpha(a), atanh_rho(r);
        starts.push_back(x);
    }
    CalibrationReport rep = run_fit(fn, std::move(starts));
    if (!(rep.max_abs_residual <= 1e-4))
        throw CalibrationError("heston_calibrate: failed to reprice quotes within 1e-4 vol", rep.max_abs_residual);
    return rep;
}

CalibrationReport heston_calibrate_fixed_alpha(std::span<const VolQuote> quotes, double beta, double alpha,
                                               const RateMarket& mkt, const HestonParams* initial) {
    validate_quotes(quotes, 2);
    if (!(beta > 0.0) || !(alpha >= 0.0)) throw DomainError("heston_calibrate_fixed_alpha: bad beta/alpha");
    int evals = 0;
    FitFunctor fn{quotes, mkt, beta, alpha, &evals};
    std::vector<Eigen::VectorXd> starts;
    Eigen::VectorXd x(2);
    if (initial) {
        x << std::log(initial->v0), atanh_rho(std::clamp(initial->rho, -0.98, 0.98));
        starts.push_back(x);
    }
    const double atm = atm_quote_vol(quotes, mkt);
    x << std::log(atm * atm), atanh_rho(0.3 * skew_sign(quotes));
    starts.push_back(x);
    return run_fit(fn, std::move(starts));
}

LocalVariance dupire_instantaneous_variance(const HestonParams& p, const RateMarket& mkt, double t,
                                            double k_eval) {
    p.validate();
    if (!(t > 0.0) || !(k_eval > 0.0)) throw DomainError("dupire: t and k_eval must be positive");
    if (p.alpha == 0.0) return {p.expected_variance(t), false, {}};

    const double h = 1e-3 * k_eval;
    const double dt = std::min(1e-3, t / 10.0);
    // Out-of-the-money side keeps the differences well conditioned; the Dupire
    // numerator and denominator are identical for calls and puts.
    const OptionKind kind = k_eval >= mkt.forward(t) ? OptionKind::Call : OptionKind::Put;
    auto price = [&](double k, double tt) { return heston_vanilla_price(p, mkt, {k, tt, kind}); };

    const double c0 = price(k_eval, t);
    const double c_up = price(k_eval + h, t);
    const double c_dn = price(k_eval - h, t);
    const double c_tu = price(k_eval, t + dt);
    const double c_td = price(k_eval, t - dt);

    const double dc_dt = (c_tu - c_td) / (2.0 * dt);
    const double dc_dk = (c_up - c_dn) / (2.0 * h);
    const double d2c_dk2 = (c_up - 2.0 * c0 + c_dn) / (h * h);
    const double numer = dc_dt + mkt.drift() * k_eval * dc_dk + mkt.rate_asset * c0;
    const double denom = 0.5 * k_eval * k_eval * d2c_dk2;

    // Density far in the tails is below the price noise floor; use the expected variance there.
    const double density_floor = 1e-7 * mkt.discount(t) / k_eval;
    if (d2c_dk2 < density_floor)
        return {p.expected_variance(t), true, "density below resolution; expected variance used"};
    if (!(numer > 0.0) || !(denom > 0.0)) return {1e-6, true, "non-positive Dupire ratio floored at 1e-6"};
    return {numer / denom, false, {}};
}

}  // namespace svsc
