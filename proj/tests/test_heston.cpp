#include <cmath>
#include <complex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "svsc/bs_analytics.hpp"
#include "svsc/errors.hpp"
#include "svsc/heston.hpp"

using namespace svsc;
using cd = std::complex<double>;

namespace {

// Heston's original P1/P2 inversion, written independently of the library pricer.
double heston_call_reference(const HestonParams& p, const RateMarket& m, double K, double T) {
    const double kappa = p.beta, theta = p.v_bar, sigma = p.alpha, rho = p.rho;
    const double x = std::log(m.spot), r = m.rate_dom, q = m.rate_asset;
    const cd i(0.0, 1.0);
    auto prob = [&](int j) {
        const double u = j == 1 ? 0.5 : -0.5;
        const double b = j == 1 ? kappa - rho * sigma : kappa;
        auto f = [&](double phi) {
            const cd bp = b - rho * sigma * i * phi;
            const cd d = std::sqrt(bp * bp - sigma * sigma * (2.0 * u * i * phi - phi * phi));
            const cd g = (bp + d) / (bp - d);
            const cd e = std::exp(d * T);
            const cd C = (r - q) * i * phi * T +
                         kappa * theta / (sigma * sigma) * ((bp + d) * T - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
            const cd D = (bp + d) / (sigma * sigma) * (1.0 - e) / (1.0 - g * e);
            const cd fj = std::exp(C + D * p.v0 + i * phi * x);
            return std::real(std::exp(-i * phi * std::log(K)) * fj / (i * phi));
        };
        double err = 0.0;
        return 0.5 + boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 1e-10, 600.0, 20, 1e-12, &err) / M_PI;
    };
    return m.spot * std::exp(-q * T) * prob(1) - K * std::exp(-r * T) * prob(2);
}

const HestonParams kP{2.0, 0.009924, 0.012, 0.2536, -0.3835};
const RateMarket kM{1.0, 0.01, 0.03};

}  // namespace

TEST(HestonPricer, MatchesOriginalFormulation) {
    for (double T : {0.1, 0.5, 1.0})
        for (double K : {0.9, 0.97, 1.0, 1.04, 1.1}) {
            const double ref = heston_call_reference(kP, kM, K, T);
            EXPECT_NEAR(heston_vanilla_price(kP, kM, {K, T, OptionKind::Call}), ref, 2e-9) << K << " " << T;
        }
}

TEST(HestonPricer, PutCallParity) {
    const double K = 1.03, T = 0.5;
    const double c = heston_vanilla_price(kP, kM, {K, T, OptionKind::Call});
    const double p = heston_vanilla_price(kP, kM, {K, T, OptionKind::Put});
    EXPECT_NEAR(c - p, kM.discount(T) * (kM.forward(T) - K), 1e-12);
}

TEST(HestonPricer, CharacteristicFunctionIsMartingale) {
    EXPECT_NEAR(std::abs(heston_char_fn(kP, cd(0.0, 0.0), 0.7) - 1.0), 0.0, 1e-14);
    // E[S_T / F_T] = 1
    EXPECT_NEAR(std::abs(heston_char_fn(kP, cd(0.0, -1.0), 0.7) - 1.0), 0.0, 1e-12);
}

TEST(HestonPricer, NoVolOfVolIsBlackScholesWithMeanVariance) {
    HestonParams p = kP;
    p.alpha = 0.0;
    const double T = 0.5;
    const double vol = std::sqrt(p.integrated_variance(T) / T);
    for (double K : {0.9, 1.0, 1.1})
        EXPECT_NEAR(heston_vanilla_price(p, kM, {K, T, OptionKind::Call}),
                    bs_vanilla_price(kM.with_vol(vol), {K, T, OptionKind::Call}), 1e-10);
}

TEST(HestonPricer, DigitalIsMinusStrikeDerivative) {
    const double h = 1e-4, T = 0.5;
    for (double K : {0.95, 1.0, 1.05}) {
        const double fd = -(heston_vanilla_price(kP, kM, {K + h, T, OptionKind::Call}) -
                            heston_vanilla_price(kP, kM, {K - h, T, OptionKind::Call})) / (2 * h);
        EXPECT_NEAR(heston_digital_price(kP, kM, {K, T, DigitalKind::Above}), fd, 1e-6);
        EXPECT_NEAR(heston_digital_price(kP, kM, {K, T, DigitalKind::Above}) +
                        heston_digital_price(kP, kM, {K, T, DigitalKind::Below}),
                    kM.discount(T), 1e-12);
    }
}

TEST(HestonPricer, NegativeCorrelationSkewsPuts) {
    const double T = 0.5, f = kM.forward(T);
    EXPECT_GT(heston_implied_vol(kP, kM, 0.95 * f, T), heston_implied_vol(kP, kM, 1.05 * f, T));
}

TEST(HestonParams, ValidateRejectsBadValues) {
    HestonParams p = kP;
    p.rho = 1.2;
    EXPECT_THROW(p.validate(), DomainError);
    p = kP;
    p.v0 = -0.01;
    EXPECT_THROW(p.validate(), DomainError);
}

TEST(HestonCalibration, RecoversPlantedParameters) {
    const HestonParams truth{2.0, 0.0095, 0.0095, 0.31, -0.42};
    const RateMarket m{1.0, 0.0, 0.0};
    std::vector<VolQuote> q;
    for (double K : {0.95, 1.0, 1.045}) q.push_back({K, heston_implied_vol(truth, m, K, 0.5), 0.5});
    const auto rep = heston_calibrate(q, 2.0, m);
    EXPECT_NEAR(rep.params.v0, truth.v0, 1e-8);
    EXPECT_NEAR(rep.params.v_bar, truth.v_bar, 1e-8);
    EXPECT_NEAR(rep.params.alpha, truth.alpha, 1e-5);
    EXPECT_NEAR(rep.params.rho, truth.rho, 1e-5);
    EXPECT_LT(rep.max_abs_residual, 1e-8);
}

TEST(HestonCalibration, SixMonthQuotesFitExactly) {
    const RateMarket m{1.0, 0.0, 0.0};
    const std::vector<VolQuote> q{{0.9554, 0.101, 0.5}, {1.0, 0.09, 0.5}, {1.0438, 0.086, 0.5}};
    const auto rep = heston_calibrate(q, 2.0, m);
    EXPECT_LT(rep.max_abs_residual, 1e-10);
    // exact fit of these quotes; the SVSC parameters that generate them differ
    EXPECT_NEAR(rep.params.v0, 0.009802, 2e-6);
    EXPECT_NEAR(rep.params.alpha, 0.3069, 2e-4);
    EXPECT_NEAR(rep.params.rho, -0.3477, 2e-4);
}

TEST(HestonCalibration, FlatQuotesGiveNoVolOfVol) {
    const RateMarket m{1.0, 0.0, 0.0};
    const std::vector<VolQuote> q{{0.95, 0.09, 0.5}, {1.0, 0.09, 0.5}, {1.05, 0.09, 0.5}};
    const auto rep = heston_calibrate(q, 2.0, m);
    EXPECT_LT(rep.params.alpha, 1e-3);
    EXPECT_NEAR(std::sqrt(rep.params.v0), 0.09, 1e-5);
}

TEST(HestonCalibration, InconsistentQuotesThrowWithResidual) {
    const RateMarket m{1.0, 0.0, 0.0};
    // a smile no three-parameter Heston fit can reach
    const std::vector<VolQuote> q{{0.95, 0.30, 0.5}, {1.0, 0.05, 0.5}, {1.05, 0.30, 0.5}};
    try {
        heston_calibrate(q, 2.0, m);
        FAIL() << "expected CalibrationError";
    } catch (const CalibrationError& e) {
        EXPECT_GT(e.best_residual(), 1e-4);
    }
}

TEST(HestonCalibration, FixedAlphaFitsCorrelationAndLevel) {
    const HestonParams truth{2.0, 0.01, 0.01, 0.3, -0.25};
    const RateMarket m{1.0, 0.0, 0.0};
    std::vector<VolQuote> q;
    for (double K : {0.96, 1.0, 1.04}) q.push_back({K, heston_implied_vol(truth, m, K, 0.25), 0.25});
    const auto rep = heston_calibrate_fixed_alpha(q, 2.0, 0.3, m);
    EXPECT_NEAR(rep.params.rho, -0.25, 1e-5);
    EXPECT_NEAR(rep.params.v0, 0.01, 1e-7);
}

TEST(Dupire, NoVolOfVolGivesExpectedVariance) {
    HestonParams p = kP;
    p.alpha = 1e-6;
    for (double t : {0.05, 0.25, 0.45}) {
        const auto lv = dupire_instantaneous_variance(p, kM, t, 1.0);
        // relative strike step 1e-3 leaves O(1e-4) relative truncation error at short expiries
        EXPECT_NEAR(lv.variance, p.expected_variance(t), 1e-3 * p.expected_variance(t)) << t;
    }
}

TEST(Dupire, SkewedModelGivesHigherLocalVarianceOnPutSide) {
    const double t = 0.25;
    const auto lo = dupire_instantaneous_variance(kP, kM, t, 0.97);
    const auto hi = dupire_instantaneous_variance(kP, kM, t, 1.03);
    EXPECT_GT(lo.variance, hi.variance);
    EXPECT_FALSE(lo.clamped);
}
