#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>

#include "svsc/bs_analytics.hpp"
#include "svsc/instruments.hpp"

namespace svsc {

/// Spot and continuously compounded rates; volatility comes from a model.
struct RateMarket {
    double spot = 1.0;
    double rate_dom = 0.0;
    double rate_asset = 0.0;

    double drift() const { return rate_dom - rate_asset; }
    double forward(double t) const;
    double discount(double t) const;
    BsMarket with_vol(double vol) const { return {spot, rate_dom, rate_asset, vol}; }
    RateMarket with_spot(double s) const { return {s, rate_dom, rate_asset}; }
};

/// Heston parameters: dv = beta (v_bar - v) dt + alpha sqrt(v) dw_v, <dw_s dw_v> = rho dt.
struct HestonParams {
    double beta = 2.0;
    double v_bar = 0.01;
    double v0 = 0.01;
    double alpha = 0.0;
    double rho = 0.0;

    void validate() const;
    // Expected instantaneous variance at t.
    double expected_variance(double t) const;
    // Integral of expected variance over [0, t].
    double integrated_variance(double t) const;
};

struct VolQuote {
    double strike = 1.0;
    double vol = 0.1;
    double expiry = 1.0;
};

/// Characteristic function of ln(S_t / F_t), rotation-safe ("little trap") form.
std::complex<double> heston_char_fn(const HestonParams& p, std::complex<double> u, double t);

double heston_vanilla_price(const HestonParams& p, const RateMarket& mkt, const Vanilla& opt);
double heston_implied_vol(const HestonParams& p, const RateMarket& mkt, double strike, double expiry);
double heston_digital_price(const HestonParams& p, const RateMarket& mkt, const EuropeanDigital& dig);

struct CalibrationReport {
    HestonParams params;
    std::array<double, 3> vol_residuals{};  // model minus quote
    double max_abs_residual = 0.0;
    int function_evaluations = 0;
};

/// Fits (v_bar = v0, alpha, rho) to three quotes sharing one expiry, beta held fixed.
/// Throws CalibrationError if the fit misses any quote by more than 1e-4 in vol.
CalibrationReport heston_calibrate(std::span<const VolQuote> quotes, double beta, const RateMarket& mkt);

/// Same, with alpha fixed as well; fits (v_bar = v0, rho) in a least-squares sense to
/// any number (>= 2) of quotes. Used for the per-row correlation in historical estimation.
CalibrationReport heston_calibrate_fixed_alpha(std::span<const VolQuote> quotes, double beta, double alpha,
                                               const RateMarket& mkt, const HestonParams* initial = nullptr);

struct LocalVariance {
    double variance = 0.0;
    bool clamped = false;
    std::string note;
};

/// Dupire local variance at (k_eval, t) implied by Heston vanilla prices.
LocalVariance dupire_instantaneous_variance(const HestonParams& p, const RateMarket& mkt, double t,
                                            double k_eval);

}  // namespace svsc
