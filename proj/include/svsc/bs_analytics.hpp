#pragma once

#include "svsc/instruments.hpp"

namespace svsc {

/// Flat Black-Scholes market. Drift is rate_dom - rate_asset.
struct BsMarket {
    double spot = 1.0;
    double rate_dom = 0.0;    // r
    double rate_asset = 0.0;  // q
    double vol = 0.1;

    double drift() const { return rate_dom - rate_asset; }
    double forward(double t) const;
    double discount(double t) const;
    BsMarket with_vol(double v) const { BsMarket m = *this; m.vol = v; return m; }
    BsMarket with_spot(double s) const { BsMarket m = *this; m.spot = s; return m; }
    void validate() const;
};

double bs_vanilla_price(const BsMarket& mkt, const Vanilla& opt);

/// Volatility reproducing `price`; mkt.vol is ignored. Throws DomainError when the
/// price lies outside the no-arbitrage bounds.
double bs_implied_vol(double price, const BsMarket& mkt, const Vanilla& opt);

/// Spot delta, no premium adjustment.
double bs_delta(const BsMarket& mkt, const Vanilla& opt);
double bs_vega(const BsMarket& mkt, const Vanilla& opt);

/// Derivative of vega with respect to the forward: -D(T) d2 phi(d1) / sigma.
double bs_vanna(const BsMarket& mkt, const Vanilla& opt);

/// Closed-form continuously monitored single-barrier price (no rebate).
/// Knock-in is computed as vanilla minus knock-out so in-out parity holds exactly.
double bs_barrier_price(const BsMarket& mkt, const BarrierOption& opt);

/// One touch paying at expiry.
double bs_one_touch_price(const BsMarket& mkt, const OneTouch& ot);

/// Undiscounted probability of touching the barrier before `ot.expiry`.
double bs_touch_probability(const BsMarket& mkt, const OneTouch& ot);

double bs_digital_price(const BsMarket& mkt, const EuropeanDigital& dig);

// Expected vanna at time t of an option struck so that its initial d1 is d1_0, averaged over
// the lognormal distribution of the forward at t (zero rates). Exact pre-limit form.
double expected_future_vanna(double d1_0, double sigma, double expiry, double t);

// Small sigma*sqrt(T) limit: initial vanna decaying linearly to zero at expiry.
double expected_future_vanna_asymptotic(double d1_0, double sigma, double expiry, double t);

/// Strike whose spot delta equals `delta` (positive for calls, negative for puts).
double strike_for_delta(const BsMarket& mkt, double delta, double expiry, OptionKind kind);

}  // namespace svsc
