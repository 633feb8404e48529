#include "svsc/bs_analytics.hpp"

#include <algorithm>
#include <cmath>

#include "svsc/errors.hpp"
#include "svsc/numerics.hpp"

namespace svsc {

using numerics::normal_cdf;
using numerics::normal_pdf;

namespace {

// Below this total volatility the price is taken as discounted intrinsic on the forward.
constexpr double kMinTotalVol = 1e-8;

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw DomainError(std::string("non-finite input: ") + what);
}

void validate_vanilla(const Vanilla& opt) {
    require_finite(opt.strike, "strike");
    require_finite(opt.expiry, "expiry");
    if (!(opt.strike > 0.0)) throw DomainError("vanilla strike must be positive");
    if (!(opt.expiry > 0.0)) throw DomainError("vanilla expiry must be positive");
}

struct D12 {
    double d1, d2, sd;
};

D12 d_terms(double fwd, double strike, double vol, double t) {
    const double sd = vol * std::sqrt(t);
    const double d1 = (std::log(fwd / strike) + 0.5 * sd * sd) / sd;
    return {d1, d1 - sd, sd};
}

double phi_sign(OptionKind k) { return k == OptionKind::Call ? 1.0 : -1.0; }

}  // namespace

double BsMarket::forward(double t) const { return spot * std::exp(drift() * t); }
double BsMarket::discount(double t) const { return std::exp(-rate_dom * t); }

void BsMarket::validate() const {
    require_finite(spot, "spot");
    require_finite(rate_dom, "rate_dom");
    require_finite(rate_asset, "rate_asset");
    require_finite(vol, "vol");
    if (!(spot > 0.0)) throw DomainError("spot must be positive");
    if (!(vol > 0.0)) throw DomainError("vol must be positive");
}

double bs_vanilla_price(const BsMarket& mkt, const Vanilla& opt) {
    mkt.validate();
    validate_vanilla(opt);
    const double t = opt.expiry;
    const double fwd = mkt.forward(t);
    const double df = mkt.discount(t);
    const double w = phi_sign(opt.kind);
    if (mkt.vol * std::sqrt(t) < kMinTotalVol) return df * std::max(w * (fwd - opt.strike), 0.0);
    const auto d = d_terms(fwd, opt.strike, mkt.vol, t);
    return df * w * (fwd * normal_cdf(w * d.d1) - opt.strike * normal_cdf(w * d.d2));
}

double bs_implied_vol(double price, const BsMarket& mkt, const Vanilla& opt) {
    validate_vanilla(opt);
    require_finite(price, "price");
    const double t = opt.expiry;
    const double fwd = mkt.forward(t);
    const double df = mkt.discount(t);
    const double k = opt.strike;
    // Work with the out-of-the-money side; parity moves the price there.
    double otm_price = price;
    OptionKind otm_kind = opt.kind;
    if (opt.kind == OptionKind::Call && fwd > k) {
        otm_price = price - df * (fwd - k);
        otm_kind = OptionKind::Put;
    } else if (opt.kind == OptionKind::Put && fwd < k) {
        otm_price = price - df * (k - fwd);
        otm_kind = OptionKind::Call;
    }
    const double upper = otm_kind == OptionKind::Call ? df * fwd : df * k;
    if (!(otm_price > 0.0) || !(otm_price < upper))
        throw DomainError("bs_implied_vol: price outside no-arbitrage bounds");

    BsMarket m = mkt;
    const Vanilla v{k, t, otm_kind};
    // Solve in log-price space so deep out-of-the-money quotes keep relative accuracy.
    const double log_target = std::log(otm_price);
    auto f = [&](double vol) {
        m.vol = vol;
        const double p = bs_vanilla_price(m, v);
        return p > 0.0 ? std::log(p) - log_target : -1e300;
    };
    double lo = 1e-3, hi = 1.0;
    if (!numerics::expand_bracket(f, lo, hi, 1e-12, 50.0) )
        throw NumericalError("bs_implied_vol: could not bracket implied volatility");
    return numerics::find_root(f, lo, hi, 1e-15);
}

double bs_delta(const BsMarket& mkt, const Vanilla& opt) {
    mkt.validate();
    validate_vanilla(opt);
    const double t = opt.expiry;
    const double dq = std::exp(-mkt.rate_asset * t);
    const double w = phi_sign(opt.kind);
    const double fwd = mkt.forward(t);
    if (mkt.vol * std::sqrt(t) < kMinTotalVol) return (w * (fwd - opt.strike) > 0.0) ? w * dq : 0.0;
    const auto d = d_terms(fwd, opt.strike, mkt.vol, t);
    return w * dq * normal_cdf(w * d.d1);
}

double bs_vega(const BsMarket& mkt, const Vanilla& opt) {
    mkt.validate();
    validate_vanilla(opt);
    const double t = opt.expiry;
    const double fwd = mkt.forward(t);
    const auto d = d_terms(fwd, opt.strike, mkt.vol, t);
    return mkt.discount(t) * fwd * normal_pdf(d.d1) * std::sqrt(t);
}

double bs_vanna(const BsMarket& mkt, const Vanilla& opt) {
    mkt.validate();
    validate_vanilla(opt);
    const double t = opt.expiry;
    const auto d = d_terms(mkt.forward(t), opt.strike, mkt.vol, t);
    return -mkt.discount(t) * d.d2 * normal_pdf(d.d1) / mkt.vol;
}

namespace {

// Deterministic-path barrier value used when total volatility vanishes.
double barrier_zero_vol(const BsMarket& mkt, const BarrierOption& opt) {
    const double t = opt.underlying.expiry;
    const double fwd = mkt.forward(t);
    const double lo = std::min(mkt.spot, fwd);
    const double hi = std::max(mkt.spot, fwd);
    const bool touched = opt.direction == BarrierDirection::Down ? lo <= opt.barrier : hi >= opt.barrier;
    const double vanilla =
        mkt.discount(t) * std::max(phi_sign(opt.underlying.kind) * (fwd - opt.underlying.strike), 0.0);
    return touched ? 0.0 : vanilla;
}

// Knock-out value from the standard reflection terms (rebate-free).
double knockout_price(const BsMarket& mkt, const BarrierOption& opt) {
    const double s = mkt.spot;
    const double k = opt.underlying.strike;
    const double h = opt.barrier;
    const double t = opt.underlying.expiry;
    const double r = mkt.rate_dom;
    const double b = mkt.drift();
    const double sig = mkt.vol;
    const double sd = sig * std::sqrt(t);
    const double mu = (b - 0.5 * sig * sig) / (sig * sig);
    const double carry = std::exp((b - r) * t);
    const double df = std::exp(-r * t);

    const bool call = opt.underlying.kind == OptionKind::Call;
    const double phi = call ? 1.0 : -1.0;
    const double eta = opt.direction == BarrierDirection::Down ? 1.0 : -1.0;

    const double x1 = std::log(s / k) / sd + (1.0 + mu) * sd;
    const double x2 = std::log(s / h) / sd + (1.0 + mu) * sd;
    const double y1 = std::log(h * h / (s * k)) / sd + (1.0 + mu) * sd;
    const double y2 = std::log(h / s) / sd + (1.0 + mu) * sd;
    const double hs = h / s;

    const double A = phi * s * carry * normal_cdf(phi * x1) - phi * k * df * normal_cdf(phi * x1 - phi * sd);
    const double B = phi * s * carry * normal_cdf(phi * x2) - phi * k * df * normal_cdf(phi * x2 - phi * sd);
    const double C = phi * s * carry * std::pow(hs, 2.0 * (mu + 1.0)) * normal_cdf(eta * y1) -
                     phi * k * df * std::pow(hs, 2.0 * mu) * normal_cdf(eta * y1 - eta * sd);
    const double D = phi * s * carry * std::pow(hs, 2.0 * (mu + 1.0)) * normal_cdf(eta * y2) -
                     phi * k * df * std::pow(hs, 2.0 * mu) * normal_cdf(eta * y2 - eta * sd);

    const bool down = opt.direction == BarrierDirection::Down;
    double v = 0.0;
    if (call && down)
        v = k > h ? A - C : B - D;
    else if (call && !down)
        v = k > h ? 0.0 : A - B + C - D;
    else if (!call && down)
        v = k > h ? A - B + C - D : 0.0;
    else
        v = k > h ? B - D : A - C;
    return std::max(v, 0.0);
}

}  // namespace

double bs_barrier_price(const BsMarket& mkt, const BarrierOption& opt) {
    mkt.validate();
    validate_vanilla(opt.underlying);
    require_finite(opt.barrier, "barrier");
    if (!(opt.barrier > 0.0)) throw DomainError("barrier must be positive");
    const double vanilla = bs_vanilla_price(mkt, opt.underlying);
    double ko = 0.0;
    if (!is_breached(mkt.spot, opt.barrier, opt.direction)) {
        ko = mkt.vol * std::sqrt(opt.underlying.expiry) < kMinTotalVol ? barrier_zero_vol(mkt, opt)
                                                                        : knockout_price(mkt, opt);
        ko = std::min(ko, vanilla);
    }
    return opt.style == BarrierStyle::KnockOut ? ko : vanilla - ko;
}

double bs_touch_probability(const BsMarket& mkt, const OneTouch& ot) {
    mkt.validate();
    require_finite(ot.barrier, "barrier");
    if (!(ot.barrier > 0.0)) throw DomainError("one touch barrier must be positive");
    if (!(ot.expiry >= 0.0)) throw DomainError("one touch expiry must be non-negative");
    if (is_breached(mkt.spot, ot.barrier, ot.direction)) return 1.0;
    if (ot.expiry == 0.0) return 0.0;
    const double t = ot.expiry;
    const double sig = mkt.vol;
    const double nu = mkt.drift() - 0.5 * sig * sig;
    const double h = std::log(ot.barrier / mkt.spot);
    const double sd = sig * std::sqrt(t);
    if (sd < kMinTotalVol) {
        const double end = nu * t;
        return ot.direction == BarrierDirection::Down ? (end <= h ? 1.0 : 0.0) : (end >= h ? 1.0 : 0.0);
    }
    const double refl = std::exp(2.0 * nu * h / (sig * sig));
    double p = 0.0;
    if (ot.direction == BarrierDirection::Down)
        p = normal_cdf((h - nu * t) / sd) + refl * normal_cdf((h + nu * t) / sd);
    else
        p = normal_cdf((-h + nu * t) / sd) + refl * normal_cdf((-h - nu * t) / sd);
    return std::clamp(p, 0.0, 1.0);
}

double bs_one_touch_price(const BsMarket& mkt, const OneTouch& ot) {
    return mkt.discount(ot.expiry) * bs_touch_probability(mkt, ot);
}

double bs_digital_price(const BsMarket& mkt, const EuropeanDigital& dig) {
    mkt.validate();
    require_finite(dig.strike, "strike");
    if (!(dig.strike > 0.0)) throw DomainError("digital strike must be positive");
    if (!(dig.expiry > 0.0)) throw DomainError("digital expiry must be positive");
    const double t = dig.expiry;
    const double fwd = mkt.forward(t);
    const double df = mkt.discount(t);
    double above = 0.0;
    if (mkt.vol * std::sqrt(t) < kMinTotalVol)
        above = fwd > dig.strike ? 1.0 : 0.0;
    else
        above = normal_cdf(d_terms(fwd, dig.strike, mkt.vol, t).d2);
    return df * (dig.kind == DigitalKind::Above ? above : 1.0 - above);
}

double expected_future_vanna(double d1_0, double sigma, double expiry, double t) {
    if (!std::isfinite(d1_0) || !std::isfinite(sigma) || !std::isfinite(expiry) || !std::isfinite(t))
        throw DomainError("expected_future_vanna: non-finite input");
    if (!(sigma > 0.0) || !(expiry > 0.0)) throw DomainError("expected_future_vanna: sigma, T must be positive");
    if (t < 0.0 || t > expiry) throw DomainError("expected_future_vanna: t must lie in [0, T]");
    const double root_t = std::sqrt(expiry);
    const double d2_0 = d1_0 - sigma * root_t;
    const double shift = sigma * t / root_t;
    return normal_pdf(d1_0 - shift) * (expiry - t) / (sigma * expiry) * (-d2_0 + shift);
}

double expected_future_vanna_asymptotic(double d1_0, double sigma, double expiry, double t) {
    if (!(sigma > 0.0) || !(expiry > 0.0)) throw DomainError("expected_future_vanna: sigma, T must be positive");
    if (t < 0.0 || t > expiry) throw DomainError("expected_future_vanna: t must lie in [0, T]");
    const double d2_0 = d1_0 - sigma * std::sqrt(expiry);
    return -d2_0 * normal_pdf(d1_0) / sigma * (expiry - t) / expiry;
}

double strike_for_delta(const BsMarket& mkt, double delta, double expiry, OptionKind kind) {
    mkt.validate();
    if (!(expiry > 0.0)) throw DomainError("strike_for_delta: expiry must be positive");
    if (!(std::abs(delta) > 0.0 && std::abs(delta) < 1.0))
        throw DomainError("strike_for_delta: |delta| must lie in (0, 1)");
    const double dq = std::exp(mkt.rate_asset * expiry);
    double d1 = 0.0;
    if (kind == OptionKind::Call) {
        if (!(delta > 0.0) || delta * dq >= 1.0) throw DomainError("strike_for_delta: unattainable call delta");
        d1 = numerics::normal_quantile(delta * dq);
    } else {
        if (!(delta < 0.0) || -delta * dq >= 1.0) throw DomainError("strike_for_delta: unattainable put delta");
        d1 = -numerics::normal_quantile(-delta * dq);
    }
    const double sd = mkt.vol * std::sqrt(expiry);
    return mkt.forward(expiry) * std::exp(-d1 * sd + 0.5 * sd * sd);
}

}  // namespace svsc
