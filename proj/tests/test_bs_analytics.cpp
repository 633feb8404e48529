#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "svsc/bs_analytics.hpp"
#include "svsc/errors.hpp"

using namespace svsc;

namespace {

double npdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double ncdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Discounted expectation of a payoff of S_T under the lognormal law, by quadrature in z.
template <class Payoff>
double lognormal_expectation(const BsMarket& m, double T, Payoff payoff) {
    const double f = m.spot * std::exp((m.rate_dom - m.rate_asset) * T);
    const double sd = m.vol * std::sqrt(T);
    auto g = [&](double z) { return payoff(f * std::exp(-0.5 * sd * sd + sd * z)) * npdf(z); };
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -12.0, 12.0, 15, 1e-13, &err);
    return std::exp(-m.rate_dom * T) * v;
}

// First-passage probability of log-spot Brownian motion with drift nu to level ln(B/S).
double touch_probability(const BsMarket& m, double B, double T, bool down) {
    const double nu = m.rate_dom - m.rate_asset - 0.5 * m.vol * m.vol;
    const double s = m.vol * std::sqrt(T);
    const double b = std::log(B / m.spot);
    const double k = std::exp(2.0 * nu * b / (m.vol * m.vol));
    if (down) return ncdf((b - nu * T) / s) + k * ncdf((b + nu * T) / s);
    return ncdf((-b + nu * T) / s) + k * ncdf((-b - nu * T) / s);
}

struct McOut {
    double mean, se;
};

// Plain GBM simulation with exact log steps and Brownian-bridge crossing probabilities.
McOut barrier_mc(const BsMarket& m, const BarrierOption& o, int n_paths, int n_steps, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud;
    const double T = o.underlying.expiry, dt = T / n_steps;
    const double mu = (m.rate_dom - m.rate_asset - 0.5 * m.vol * m.vol) * dt, sd = m.vol * std::sqrt(dt);
    const double lb = std::log(o.barrier);
    double sum = 0.0, sum2 = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        double x = std::log(m.spot);
        bool hit = false;
        for (int i = 0; i < n_steps && !hit; ++i) {
            const double y = x + mu + sd * nd(rng);
            const bool down = o.direction == BarrierDirection::Down;
            if (down ? y <= lb : y >= lb) hit = true;
            else {
                const double pc = std::exp(-2.0 * (x - lb) * (y - lb) / (sd * sd));
                if (ud(rng) < pc) hit = true;
            }
            x = y;
        }
        double pay = 0.0;
        if (!hit) {
            const double s = std::exp(x), k = o.underlying.strike;
            pay = o.underlying.kind == OptionKind::Call ? std::max(s - k, 0.0) : std::max(k - s, 0.0);
        }
        pay *= std::exp(-m.rate_dom * T);
        sum += pay;
        sum2 += pay * pay;
    }
    const double mean = sum / n_paths;
    return {mean, std::sqrt((sum2 / n_paths - mean * mean) / n_paths)};
}

const BsMarket kMkt{1.0, 0.02, 0.05, 0.11};

}  // namespace

TEST(BsVanilla, MatchesLognormalQuadrature) {
    for (double K : {0.8, 0.95, 1.0, 1.07, 1.3})
        for (double T : {0.1, 0.5, 2.0}) {
            const double c = lognormal_expectation(kMkt, T, [&](double s) { return std::max(s - K, 0.0); });
            const double p = lognormal_expectation(kMkt, T, [&](double s) { return std::max(K - s, 0.0); });
            EXPECT_NEAR(bs_vanilla_price(kMkt, {K, T, OptionKind::Call}), c, 1e-12);
            EXPECT_NEAR(bs_vanilla_price(kMkt, {K, T, OptionKind::Put}), p, 1e-12);
        }
}

TEST(BsVanilla, PutCallParity) {
    const double K = 1.02, T = 0.7;
    const double lhs = bs_vanilla_price(kMkt, {K, T, OptionKind::Call}) - bs_vanilla_price(kMkt, {K, T, OptionKind::Put});
    EXPECT_NEAR(lhs, kMkt.discount(T) * (kMkt.forward(T) - K), 1e-15);
}

TEST(BsVanilla, ZeroVolIsIntrinsicOnForward) {
    const BsMarket m{1.0, 0.03, 0.01, 1e-10};
    const double T = 1.0;
    EXPECT_NEAR(bs_vanilla_price(m, {0.9, T, OptionKind::Call}), m.discount(T) * (m.forward(T) - 0.9), 1e-12);
    EXPECT_NEAR(bs_vanilla_price(m, {1.2, T, OptionKind::Call}), 0.0, 1e-12);
}

TEST(BsVanilla, RejectsBadInputs) {
    EXPECT_THROW(bs_vanilla_price(kMkt, {-1.0, 0.5, OptionKind::Call}), DomainError);
    EXPECT_THROW(bs_vanilla_price(kMkt, {1.0, -0.5, OptionKind::Call}), DomainError);
    EXPECT_THROW(bs_vanilla_price(kMkt.with_vol(std::nan("")), {1.0, 0.5, OptionKind::Call}), DomainError);
}

TEST(BsImpliedVol, RoundTrip) {
    for (double K : {0.7, 0.95, 1.0, 1.1, 1.5})
        for (double v : {0.03, 0.1, 0.4}) {
            const Vanilla o{K, 0.8, K < 1.0 ? OptionKind::Put : OptionKind::Call};
            const double px = bs_vanilla_price(kMkt.with_vol(v), o);
            if (px < 1e-14) continue;
            EXPECT_NEAR(bs_implied_vol(px, kMkt, o), v, 1e-7) << K << " " << v;
        }
}

TEST(BsImpliedVol, OutsideBoundsThrows) {
    const Vanilla o{1.0, 0.5, OptionKind::Call};
    EXPECT_THROW(bs_implied_vol(-0.01, kMkt, o), DomainError);
    EXPECT_THROW(bs_implied_vol(2.0, kMkt, o), DomainError);
}

TEST(BsGreeks, MatchFiniteDifferences) {
    const double h = 1e-5;
    for (auto kind : {OptionKind::Call, OptionKind::Put})
        for (double K : {0.9, 1.0, 1.1}) {
            const Vanilla o{K, 0.6, kind};
            const double fd_delta = (bs_vanilla_price(kMkt.with_spot(1 + h), o) - bs_vanilla_price(kMkt.with_spot(1 - h), o)) / (2 * h);
            EXPECT_NEAR(bs_delta(kMkt, o), fd_delta, 1e-8);
            const double fd_vega = (bs_vanilla_price(kMkt.with_vol(kMkt.vol + h), o) -
                                    bs_vanilla_price(kMkt.with_vol(kMkt.vol - h), o)) / (2 * h);
            EXPECT_NEAR(bs_vega(kMkt, o), fd_vega, 1e-8);
            // vanna is the forward derivative of vega; dF = dS e^{(r-q)T}
            const double grow = std::exp((kMkt.rate_dom - kMkt.rate_asset) * o.expiry);
            const double fd_vanna = (bs_vega(kMkt.with_spot(1 + h), o) - bs_vega(kMkt.with_spot(1 - h), o)) / (2 * h) / grow;
            EXPECT_NEAR(bs_vanna(kMkt, o), fd_vanna, 1e-6);
        }
}

TEST(BsDigital, IsMinusStrikeDerivativeOfCall) {
    const double h = 1e-5, T = 0.5;
    for (double K : {0.9, 1.0, 1.2}) {
        const double fd = -(bs_vanilla_price(kMkt, {K + h, T, OptionKind::Call}) - bs_vanilla_price(kMkt, {K - h, T, OptionKind::Call})) / (2 * h);
        EXPECT_NEAR(bs_digital_price(kMkt, {K, T, DigitalKind::Above}), fd, 1e-8);
    }
}

TEST(BsDigital, AboveAndBelowSumToDiscountFactor) {
    for (double K : {0.5, 1.0, 1.7}) {
        const double s = bs_digital_price(kMkt, {K, 1.3, DigitalKind::Above}) + bs_digital_price(kMkt, {K, 1.3, DigitalKind::Below});
        EXPECT_NEAR(s, kMkt.discount(1.3), 1e-12);
    }
}

TEST(BsOneTouch, MatchesFirstPassageFormula) {
    for (double B : {0.85, 0.95, 1.05, 1.2})
        for (const BsMarket& m : {kMkt, BsMarket{1.0, 0.0, 0.0, 0.09}}) {
            const bool down = B < 1.0;
            const OneTouch ot{B, 0.5, down ? BarrierDirection::Down : BarrierDirection::Up};
            const double p = touch_probability(m, B, 0.5, down);
            EXPECT_NEAR(bs_touch_probability(m, ot), p, 1e-12);
            EXPECT_NEAR(bs_one_touch_price(m, ot), m.discount(0.5) * p, 1e-12);
        }
}

TEST(BsOneTouch, BreachedBarrierPaysDiscountFactor) {
    EXPECT_NEAR(bs_one_touch_price(kMkt, {1.0, 0.5, BarrierDirection::Down}), kMkt.discount(0.5), 1e-15);
    EXPECT_NEAR(bs_one_touch_price(kMkt, {1.1, 0.5, BarrierDirection::Down}), kMkt.discount(0.5), 1e-15);
}

TEST(BsBarrier, ImageFormulaAtZeroDrift) {
    // martingale spot: a down-and-in call with B <= K is worth (S/B) calls struck at K from spot B^2/S
    const BsMarket m{1.0, 0.0, 0.0, 0.12};
    for (double B : {0.9, 0.95, 0.99})
        for (double K : {1.0, 1.05}) {
            const Vanilla c{K, 0.75, OptionKind::Call};
            const double di = (m.spot / B) * bs_vanilla_price(m.with_spot(B * B / m.spot), c);
            const BarrierOption ko{c, B, BarrierStyle::KnockOut, BarrierDirection::Down};
            EXPECT_NEAR(bs_barrier_price(m, ko), bs_vanilla_price(m, c) - di, 1e-12);
        }
}

TEST(BsBarrier, InOutParityIsExact) {
    for (auto kind : {OptionKind::Call, OptionKind::Put})
        for (auto dir : {BarrierDirection::Up, BarrierDirection::Down}) {
            const double B = dir == BarrierDirection::Up ? 1.1 : 0.92;
            const Vanilla u{1.0, 0.5, kind};
            const double ko = bs_barrier_price(kMkt, {u, B, BarrierStyle::KnockOut, dir});
            const double ki = bs_barrier_price(kMkt, {u, B, BarrierStyle::KnockIn, dir});
            EXPECT_NEAR(ko + ki, bs_vanilla_price(kMkt, u), 1e-14);
        }
}

TEST(BsBarrier, MatchesIndependentSimulation) {
    const BarrierOption cases[] = {
        {{1.0, 0.5, OptionKind::Call}, 0.95, BarrierStyle::KnockOut, BarrierDirection::Down},
        {{1.0, 0.5, OptionKind::Call}, 1.08, BarrierStyle::KnockOut, BarrierDirection::Up},
        {{0.98, 0.5, OptionKind::Put}, 1.03, BarrierStyle::KnockOut, BarrierDirection::Up},
        {{1.02, 0.5, OptionKind::Put}, 0.9, BarrierStyle::KnockOut, BarrierDirection::Down},
    };
    unsigned seed = 7;
    for (const auto& o : cases) {
        const auto mc = barrier_mc(kMkt, o, 100000, 100, seed++);
        EXPECT_NEAR(bs_barrier_price(kMkt, o), mc.mean, 4.0 * mc.se + 1e-6) << describe(o);
    }
}

TEST(BsBarrier, FarBarrierIsVanilla) {
    const Vanilla u{1.0, 0.5, OptionKind::Call};
    EXPECT_NEAR(bs_barrier_price(kMkt, {u, 1e-3, BarrierStyle::KnockOut, BarrierDirection::Down}),
                bs_vanilla_price(kMkt, u), 1e-12);
}

TEST(BsBarrier, BreachedKnockoutIsWorthless) {
    const Vanilla u{1.0, 0.5, OptionKind::Call};
    EXPECT_EQ(bs_barrier_price(kMkt, {u, 1.0, BarrierStyle::KnockOut, BarrierDirection::Down}), 0.0);
}

TEST(StrikeForDelta, RoundTripsThroughDelta) {
    for (double d : {0.1, 0.25, 0.5, 0.75}) {
        const double kc = strike_for_delta(kMkt, d, 0.5, OptionKind::Call);
        EXPECT_NEAR(bs_delta(kMkt, {kc, 0.5, OptionKind::Call}), d, 1e-10);
        const double kp = strike_for_delta(kMkt, -d, 0.5, OptionKind::Put);
        EXPECT_NEAR(bs_delta(kMkt, {kp, 0.5, OptionKind::Put}), -d, 1e-10);
    }
}

TEST(StrikeForDelta, SixMonthQuoteStrikes) {
    // 25-delta strikes behind the six-month 10.1% / 8.6% quotes with the forward at 1
    const BsMarket m{1.0, 0.0, 0.0, 0.1};
    EXPECT_NEAR(strike_for_delta(m.with_vol(0.101), -0.25, 0.5, OptionKind::Put), 0.9554, 5e-5);
    EXPECT_NEAR(strike_for_delta(m.with_vol(0.086), 0.25, 0.5, OptionKind::Call), 1.0438, 5e-5);
}

namespace {

double vanna_quadrature(double d1_0, double sigma, double T, double t) {
    const double st = sigma * std::sqrt(t), tau = T - t;
    auto integrand = [&](double x) {
        const double d1 = (x + d1_0 * sigma * std::sqrt(T) - 0.5 * sigma * sigma * t) / (sigma * std::sqrt(tau));
        const double d2 = d1 - sigma * std::sqrt(tau);
        const double v = -d2 * npdf(d1) / sigma;
        return v * npdf((x + 0.5 * sigma * sigma * t) / st) / st;
    };
    const double c = -0.5 * sigma * sigma * t;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, c - 14 * st, c + 14 * st, 20, 1e-14, &err);
}

}  // namespace

TEST(ExpectedFutureVanna, ExactFormMatchesQuadrature) {
    for (double d1 : {-1.0, -0.67, 0.0, 0.3, 0.67})
        for (double sigma : {0.05, 0.1, 0.3})
            for (double frac : {0.1, 0.5, 0.9}) {
                const double T = 0.75, t = frac * T;
                const double q = vanna_quadrature(d1, sigma, T, t);
                const double e = expected_future_vanna(d1, sigma, T, t);
                EXPECT_NEAR(e, q, 1e-6 * std::max(1.0, std::abs(q))) << d1 << " " << sigma << " " << t;
            }
}

TEST(ExpectedFutureVanna, AsymptoticFormAgreesAtStart) {
    EXPECT_NEAR(expected_future_vanna(0.4, 0.1, 1.0, 0.0), expected_future_vanna_asymptotic(0.4, 0.1, 1.0, 0.0), 1e-14);
    EXPECT_NEAR(expected_future_vanna(0.4, 0.1, 1.0, 1.0), 0.0, 1e-14);
}

TEST(ExpectedFutureVanna, RejectsTimeOutsideLife) {
    EXPECT_THROW(expected_future_vanna(0.0, 0.1, 1.0, 1.5), DomainError);
    EXPECT_THROW(expected_future_vanna(0.0, 0.0, 1.0, 0.5), DomainError);
}
