#include "svsc/approx_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svsc/errors.hpp"
#include "svsc/numerics.hpp"

namespace svsc {

namespace {

constexpr double kRhoCap = 0.99;

// (1 - e^{-x}) / x, equal to 1 at x = 0.
double decay_avg(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

OptionKind opposite(OptionKind k) { return k == OptionKind::Call ? OptionKind::Put : OptionKind::Call; }

DigitalKind digital_side(BarrierDirection d) {
    return d == BarrierDirection::Down ? DigitalKind::Below : DigitalKind::Above;
}

double leg_price(const HestonParams& hp, const RateMarket& mkt, const Instrument& inst, double expiry) {
    if (const auto* v = std::get_if<Vanilla>(&inst)) {
        Vanilla o = *v;
        o.expiry = expiry;
        return heston_vanilla_price(hp, mkt, o);
    }
    if (const auto* d = std::get_if<EuropeanDigital>(&inst)) {
        EuropeanDigital o = *d;
        o.expiry = expiry;
        return heston_digital_price(hp, mkt, o);
    }
    throw DomainError("replication legs must be vanillas or digitals");
}

double portfolio_price(const ReplicationPortfolio& rp, const HestonParams& hp, const RateMarket& mkt,
                       double expiry) {
    double v = 0.0;
    for (const auto& leg : rp.legs) v += leg.quantity * leg_price(hp, mkt, leg.instrument, expiry);
    return v;
}

// Shared unwind loop: bucketed first-touch probabilities and the value of the replication
// portfolio at each bucket midpoint, conditional on touching the barrier there.
UnwindGrid build_unwind_grid(const ReplicationPortfolio& rp, BarrierDirection dir, const HestonParams& hp,
                             const RateMarket& mkt, double atm_vol, const SvscMarks& marks,
                             const ApproxOptions& opt, std::vector<std::string>& warnings) {
    if (opt.n_buckets < 1) throw DomainError("n_buckets must be positive");
    const double T = rp.expiry;
    const double B = rp.barrier;
    const int n = opt.n_buckets;
    const RateMarket at_barrier = mkt.with_spot(B);

    UnwindGrid grid;
    grid.buckets.reserve(static_cast<std::size_t>(n));
    double p_prev = 0.0;
    bool warned_rho = false;
    for (int i = 0; i < n; ++i) {
        UnwindBucket b;
        b.t_start = T * i / n;
        b.t_end = T * (i + 1) / n;
        b.t_mid = 0.5 * (b.t_start + b.t_end);
        b.p_start = p_prev;
        // probabilities are cumulative; force monotonicity against quadrature noise
        b.p_end = std::max(p_prev, first_touch_probability(b.t_end, B, dir, hp, mkt, atm_vol));
        p_prev = b.p_end;
        b.discount = mkt.discount(b.t_mid);

        b.conditional_rho = conditional_expected_correlation(b.t_mid, B, mkt.forward(b.t_mid), hp.rho, marks.gamma,
                                                             marks.xi, hp.v_bar);
        if (opt.rho_anchor == UnwindRhoAnchor::RhoH) {
            auto u = unwind_correlation(b.t_mid, T, b.conditional_rho, hp.rho, marks.beta, marks.gamma);
            b.unwind_rho = u.value;
            if (u.clamped && !warned_rho) {
                warnings.push_back("unwind correlation clamped to +-0.99");
                warned_rho = true;
            }
        } else {
            b.unwind_rho = std::clamp(b.conditional_rho, -kRhoCap, kRhoCap);
        }

        const double k_eval = opt.dupire_point == DupirePoint::Barrier ? B : mkt.forward(b.t_mid);
        auto lv = dupire_instantaneous_variance(hp, mkt, b.t_mid, k_eval);
        if (lv.clamped) {
            std::ostringstream os;
            os << "local variance at t=" << b.t_mid << ": " << lv.note;
            warnings.push_back(os.str());
        }
        b.local_variance = lv.variance;

        HestonParams hu = hp;
        hu.v0 = lv.variance;
        hu.rho = b.unwind_rho;
        b.replication_value = portfolio_price(rp, hu, at_barrier, T - b.t_mid);
        grid.buckets.push_back(b);
    }
    return grid;
}

double heston_atm_vol(const HestonParams& hp, const RateMarket& mkt, double t) {
    return heston_implied_vol(hp, mkt, mkt.forward(t), t);
}

}  // namespace

DFactors d_factors(double beta, double gamma, double expiry) {
    if (!(beta > 0.0) || !(gamma >= 0.0) || !(expiry >= 0.0))
        throw DomainError("d_factors: need beta > 0, gamma >= 0, T >= 0");
    const double T = expiry;
    if (std::max(beta, gamma) * T < 1e-6) {
        return {0.5 * beta * T - beta * beta * T * T / 6.0, 0.5 * beta * T - beta * (beta + gamma) * T * T / 6.0};
    }
    const double x = beta * T;
    DFactors f;
    f.d1 = x < 1e-4 ? x / 2 - x * x / 6 + x * x * x / 24 - x * x * x * x / 120 : 1.0 - decay_avg(x);
    // (e^{-bT} - e^{-gT}) / ((b - g) T) written so gamma == beta is not a special case
    const double y = (gamma - beta) * T;
    const double cross = std::abs(y) < 1e-8 ? -(1.0 - 0.5 * y) : std::expm1(-y) / y;
    f.d2 = decay_avg(gamma * T) + std::exp(-beta * T) * cross;
    return f;
}

ClampedValue effective_correlation(const EffectiveCorrInputs& in) {
    const auto f = d_factors(in.beta, in.gamma, in.expiry);
    const double ratio = f.d1 > 0.0 ? f.d2 / f.d1 : 1.0;
    const double raw = in.rho_bar + (in.rho0 - in.rho_bar) * ratio;
    const double v = std::clamp(raw, -kRhoCap, kRhoCap);
    return {v, v != raw};
}

double reflected_strike(const BsMarket& mkt, double strike, double barrier, double expiry, OptionKind kind) {
    mkt.validate();
    if (!(strike > 0.0) || !(barrier > 0.0) || !(expiry > 0.0)) throw DomainError("reflected_strike: bad inputs");
    const BarrierDirection dir = kind == OptionKind::Call ? BarrierDirection::Down : BarrierDirection::Up;
    if ((dir == BarrierDirection::Down && barrier > strike) || (dir == BarrierDirection::Up && barrier < strike))
        throw DomainError("reflected_strike: barrier must be out of the money");

    const Vanilla under{strike, expiry, kind};
    const double target =
        bs_vanilla_price(mkt, under) - bs_barrier_price(mkt, {under, barrier, BarrierStyle::KnockOut, dir});
    const OptionKind other = opposite(kind);
    auto f = [&](double kp) {
        return bs_vanilla_price(mkt, Vanilla{kp, expiry, other}) * std::sqrt(strike / kp) - target;
    };
    const double guess = barrier * barrier / strike;
    if (target <= 0.0) return guess;
    double lo = 0.9 * guess, hi = 1.1 * guess;
    if (!numerics::expand_bracket(f, lo, hi, 1e-6 * strike, 1e3 * strike))
        throw ReplicationError("reflected_strike: no bracket for the reflected strike");
    return numerics::find_root(f, lo, hi, 1e-15 * strike);
}

double conditional_expected_correlation(double t, double barrier, double forward_t, double rho_h, double gamma,
                                        double xi, double sigma2) {
    if (!(t > 0.0)) return rho_h;
    const double g = decay_avg(gamma * t);
    const double bridge = std::log(barrier / forward_t) + 0.5 * sigma2 * t;
    auto pass = [&](double rho_prime) {
        const double s = std::sqrt(std::max(0.0, 1.0 - rho_prime * rho_prime));
        return std::clamp(rho_h + xi * s * g * bridge, -1.0, 1.0);
    };
    const double rho1 = pass(rho_h);
    return pass(0.5 * (rho_h + rho1));
}

ClampedValue unwind_correlation(double t, double expiry, double conditional_rho, double rho_h, double beta,
                                double gamma) {
    const double tau = expiry - t;
    double ratio = 1.0;
    if (tau > 0.0) {
        const auto f = d_factors(beta, gamma, tau);
        ratio = f.d1 > 0.0 ? f.d2 / f.d1 : 1.0;
    }
    const double raw = rho_h + (conditional_rho - rho_h) * ratio;
    const double v = std::clamp(raw, -kRhoCap, kRhoCap);
    return {v, v != raw};
}

double first_touch_probability(double t, double barrier, BarrierDirection direction, const HestonParams& hp,
                               const RateMarket& mkt, double atm_vol) {
    if (!(t > 0.0)) return is_breached(mkt.spot, barrier, direction) ? 1.0 : 0.0;
    const BsMarket bs = mkt.with_vol(atm_vol);
    const double p_bs = bs_touch_probability(bs, OneTouch{barrier, t, direction});
    if (p_bs >= 1.0) return 1.0;
    const EuropeanDigital dig{barrier, t, digital_side(direction)};
    const double df = mkt.discount(t);
    const double e_h = heston_digital_price(hp, mkt, dig) / df;
    const double e_bs = bs_digital_price(bs, dig) / df;
    return std::clamp(p_bs + 2.0 * (e_h - e_bs) * (1.0 - p_bs), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

VolMarket::VolMarket(RateMarket rates, std::vector<TenorQuotes> tenors, double beta,
                     std::vector<MarketVanilla> vanillas)
    : rates_(rates), tenors_(std::move(tenors)), beta_(beta), vanillas_(std::move(vanillas)) {
    if (tenors_.empty()) throw DomainError("VolMarket needs at least one quoted tenor");
    std::sort(tenors_.begin(), tenors_.end(), [](const auto& a, const auto& b) { return a.expiry < b.expiry; });
    calibrations_.reserve(tenors_.size());
    for (auto& tq : tenors_) {
        for (auto& q : tq.quotes) q.expiry = tq.expiry;
        calibrations_.push_back(heston_calibrate(tq.quotes, beta_, rates_));
    }
}

std::size_t VolMarket::nearest(double t) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < tenors_.size(); ++i)
        if (std::abs(tenors_[i].expiry - t) < std::abs(tenors_[best].expiry - t)) best = i;
    return best;
}

const CalibrationReport& VolMarket::heston_at(double t) const { return calibrations_[nearest(t)]; }

double VolMarket::atm_vol(double t) const { return heston_atm_vol(heston_at(t).params, rates_, t); }

double VolMarket::vanilla_price(const Vanilla& opt) const {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    for (const auto& mv : vanillas_) {
        if (!close(mv.option.strike, opt.strike) || !close(mv.option.expiry, opt.expiry)) continue;
        if (mv.option.kind == opt.kind) return mv.price;
        const double fwd = rates_.spot * std::exp(-rates_.rate_asset * opt.expiry) -
                           opt.strike * rates_.discount(opt.expiry);
        return opt.kind == OptionKind::Call ? mv.price + fwd : mv.price - fwd;
    }
    return heston_vanilla_price(heston_at(opt.expiry).params, rates_, opt);
}

// ---------------------------------------------------------------------------

ReplicationPortfolio barrier_replication(const BsMarket& mkt, const Vanilla& underlying, double barrier) {
    ReplicationPortfolio rp;
    rp.strike = underlying.strike;
    rp.barrier = barrier;
    rp.expiry = underlying.expiry;
    rp.reflected_strike = reflected_strike(mkt, underlying.strike, barrier, underlying.expiry, underlying.kind);
    rp.legs.push_back({underlying, 1.0});
    rp.legs.push_back({Vanilla{rp.reflected_strike, underlying.expiry, opposite(underlying.kind)},
                       -std::sqrt(underlying.strike / rp.reflected_strike)});
    return rp;
}

ApproxResult price_otm_barrier(const VolMarket& market, const SvscMarks& marks, const BarrierOption& opt,
                               const ApproxOptions& options) {
    const auto& u = opt.underlying;
    const RateMarket& mkt = market.rates();
    if (!is_otm_barrier(opt)) throw DomainError("price_otm_barrier: barrier is in the money");
    if (!(u.expiry > 0.0)) throw DomainError("price_otm_barrier: expiry must be positive");

    ApproxResult out;
    auto& dg = out.diagnostics;
    dg.market_vanilla_value = market.vanilla_price(u);
    if (opt.style == BarrierStyle::KnockIn) {
        BarrierOption ko = opt;
        ko.style = BarrierStyle::KnockOut;
        out = price_otm_barrier(market, marks, ko, options);
        out.result.price = out.diagnostics.market_vanilla_value - out.result.price;
        out.diagnostics.final_price = out.result.price;
        return out;
    }
    if (is_breached(mkt.spot, opt.barrier, opt.direction)) {
        dg.no_touch_probability = 0.0;
        dg.warnings.push_back("barrier already breached");
        return out;
    }
    // an up barrier below a call strike (down barrier above a put strike) must be crossed
    // before the option can finish in the money
    if ((u.kind == OptionKind::Call) != (opt.direction == BarrierDirection::Down)) {
        dg.no_touch_probability = 0.0;
        return out;
    }

    const double T = u.expiry;
    const HestonParams hp = market.heston_at(T).params;
    dg.heston = hp;
    dg.atm_vol = heston_atm_vol(hp, mkt, T);

    out.replication = barrier_replication(mkt.with_vol(dg.atm_vol), u, opt.barrier);
    const auto& rp = out.replication;

    dg.replication_value = portfolio_price(rp, hp, mkt, T);
    out.grid = build_unwind_grid(rp, opt.direction, hp, mkt, dg.atm_vol, marks, options, dg.warnings);
    double vu = 0.0;
    for (const auto& b : out.grid.buckets) vu += b.replication_value * b.discount * (b.p_end - b.p_start);
    dg.unwind_value = vu;
    dg.heston_barrier_value = std::max(0.0, dg.replication_value - vu);
    dg.heston_vanilla_value = heston_vanilla_price(hp, mkt, u);
    if (dg.heston_vanilla_value <= 0.0) throw ReplicationError("price_otm_barrier: Heston vanilla price is zero");
    dg.no_touch_probability = std::clamp(dg.heston_barrier_value / dg.heston_vanilla_value, 0.0, 1.0);
    dg.final_price = dg.market_vanilla_value * dg.no_touch_probability;
    out.result.price = dg.final_price;
    return out;
}

ApproxResult price_one_touch(const VolMarket& market, const SvscMarks& marks, const OneTouch& ot,
                             const ApproxOptions& options) {
    if (!(ot.expiry > 0.0) || !(ot.barrier > 0.0)) throw DomainError("price_one_touch: bad inputs");
    const RateMarket& mkt = market.rates();
    const double T = ot.expiry;
    const double dT = mkt.discount(T);

    ApproxResult out;
    auto& dg = out.diagnostics;
    if (is_breached(mkt.spot, ot.barrier, ot.direction)) {
        out.result.price = dg.final_price = dT;
        dg.no_touch_probability = 0.0;
        dg.warnings.push_back("barrier already breached");
        return out;
    }
    const HestonParams hp = market.heston_at(T).params;
    dg.heston = hp;
    dg.atm_vol = heston_atm_vol(hp, mkt, T);

    auto& rp = out.replication;
    rp.strike = rp.reflected_strike = rp.barrier = ot.barrier;
    rp.expiry = T;
    rp.legs.push_back({EuropeanDigital{ot.barrier, T, digital_side(ot.direction)}, 2.0});

    dg.replication_value = portfolio_price(rp, hp, mkt, T);
    out.grid = build_unwind_grid(rp, ot.direction, hp, mkt, dg.atm_vol, marks, options, dg.warnings);
    double v = dg.replication_value;
    double vu = 0.0;
    for (const auto& b : out.grid.buckets) {
        const double dp = b.p_end - b.p_start;
        v += dp * dT;
        vu += dp * b.discount * b.replication_value;
    }
    v -= vu;
    dg.unwind_value = vu;
    dg.heston_barrier_value = v;
    dg.no_touch_probability = std::clamp(1.0 - v / dT, 0.0, 1.0);
    dg.final_price = out.result.price = std::clamp(v, 0.0, dT);
    return out;
}

double price_barrier_forward(const VolMarket& market, const SvscMarks& marks, double strike, double barrier,
                             BarrierDirection direction, double expiry, const ApproxOptions& options) {
    const RateMarket& mkt = market.rates();
    const double T = expiry;
    const double fwd = mkt.spot * std::exp(-mkt.rate_asset * T) - strike * mkt.discount(T);
    if (is_breached(mkt.spot, barrier, direction)) return 0.0;
    const double vot = price_one_touch(market, marks, OneTouch{barrier, T, direction}, options).result.price;
    double v = fwd - (barrier - strike) * vot;
    const double carry = mkt.rate_asset - mkt.rate_dom;
    if (carry != 0.0) {
        const int n = options.n_buckets;
        double strip = 0.0;
        for (int i = 0; i < n; ++i) {
            const double t = T * (i + 0.5) / n;
            const double ot = price_one_touch(market, marks, OneTouch{barrier, t, direction}, options).result.price;
            strip += std::exp(-mkt.rate_asset * (T - t)) * ot;
        }
        v += barrier * carry * strip * (T / n);
    }
    return v;
}

ApproxResult price_itm_barrier(const VolMarket& market, const SvscMarks& marks, const BarrierOption& opt,
                               const ApproxOptions& options) {
    if (is_otm_barrier(opt)) throw DomainError("price_itm_barrier: barrier is out of the money");
    if (opt.style == BarrierStyle::KnockIn) {
        BarrierOption ko = opt;
        ko.style = BarrierStyle::KnockOut;
        auto out = price_itm_barrier(market, marks, ko, options);
        out.diagnostics.market_vanilla_value = market.vanilla_price(opt.underlying);
        out.result.price = out.diagnostics.market_vanilla_value - out.result.price;
        out.diagnostics.final_price = out.result.price;
        return out;
    }
    // knock-out call minus knock-out put with the same strike and barrier is the barrier forward
    BarrierOption counterpart = opt;
    counterpart.underlying.kind = opposite(opt.underlying.kind);
    auto out = price_otm_barrier(market, marks, counterpart, options);
    const double bf = price_barrier_forward(market, marks, opt.underlying.strike, opt.barrier, opt.direction,
                                            opt.underlying.expiry, options);
    const double sign = opt.underlying.kind == OptionKind::Call ? 1.0 : -1.0;
    out.result.price = std::max(0.0, out.result.price + sign * bf);
    out.diagnostics.final_price = out.result.price;
    out.diagnostics.market_vanilla_value = market.vanilla_price(opt.underlying);
    return out;
}

ApproxResult price_barrier(const VolMarket& market, const SvscMarks& marks, const BarrierOption& opt,
                           const ApproxOptions& options) {
    return is_otm_barrier(opt) ? price_otm_barrier(market, marks, opt, options)
                               : price_itm_barrier(market, marks, opt, options);
}

}  // namespace svsc
