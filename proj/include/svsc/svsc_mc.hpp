#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "svsc/heston.hpp"
#include "svsc/instruments.hpp"

namespace svsc {

/// Full SVSC parameter set. heston.rho is the initial correlation rho(0).
struct SvscParams {
    HestonParams heston;
    double gamma = 0.0;     // correlation mean reversion
    double rho_bar = 0.0;   // long-run correlation
    double epsilon = 0.0;   // correlation volatility
    double rho_cs = 0.0;    // spot / correlation correlation
    RateMarket market;

    void validate() const;
    double xi() const { return rho_cs * epsilon; }
    // Expected correlation path rho_bar + (rho0 - rho_bar) e^{-gamma t}.
    double expected_correlation(double t) const;
};

/// Determinant of the instantaneous 3x3 correlation matrix of (w_s, w_v, w_rho).
double correlation_matrix_determinant(double rho, double rho_cs);

struct McConfig {
    std::int64_t n_paths = 100000;
    int n_steps = 500;  // time steps over the longest instrument expiry
    std::uint64_t seed = 42;
    bool antithetic = true;
    bool bridge_correction = false;
    int threads = 1;

    void validate() const;
};

struct PricingResult {
    double price = 0.0;
    double stderr_ = 0.0;
    std::int64_t n_paths = 0;
    int n_steps = 0;
    std::uint64_t seed = 0;
};

struct McState {
    double x;    // log spot
    double v;    // instantaneous variance
    double rho;  // spot/vol correlation
};

/// Independent standard normal draws; simulate_step correlates them against the
/// state-dependent 3x3 correlation matrix.
using NormalTriple = std::array<double, 3>;

/// Correlated Brownian increments (per unit sqrt(dt)) for the current correlation.
NormalTriple correlate(const NormalTriple& z, double rho, double rho_cs);

/// One Euler step: full truncation for v, clamped Euler for rho.
/// Returns true when rho had to be clamped.
bool simulate_step(McState& s, double dt, const NormalTriple& z, const SvscParams& p);

struct McDiagnostics {
    std::int64_t steps = 0;
    std::int64_t rho_clamps = 0;
    double clamp_rate() const { return steps ? static_cast<double>(rho_clamps) / static_cast<double>(steps) : 0.0; }
};

/// Prices every instrument on the same set of paths (common random numbers).
std::vector<PricingResult> price_book_mc(const SvscParams& p, const McConfig& cfg,
                                         std::span<const Instrument> book, McDiagnostics* diag = nullptr);

PricingResult price_vanilla_mc(const SvscParams& p, const McConfig& cfg, const Vanilla& opt);
PricingResult price_digital_mc(const SvscParams& p, const McConfig& cfg, const EuropeanDigital& dig);
PricingResult price_one_touch_mc(const SvscParams& p, const McConfig& cfg, const OneTouch& ot);
PricingResult price_barrier_mc(const SvscParams& p, const McConfig& cfg, const BarrierOption& opt);

struct SmilePoint {
    double strike = 0.0;
    double vol = 0.0;
    double vol_stderr = 0.0;
    double price = 0.0;
    double price_stderr = 0.0;
    bool flagged = false;  // MC price outside arbitrage bounds
};

std::vector<SmilePoint> svsc_smile(const SvscParams& p, const McConfig& cfg, std::span<const double> strikes,
                                  double expiry);

/// Converts MC vanilla results into implied vols (out-of-the-money side).
SmilePoint smile_point_from_price(const RateMarket& mkt, double strike, double expiry, OptionKind kind,
                                  const PricingResult& res);

struct FirstTouchDistribution {
    std::vector<double> bucket_end;          // right edge of each bucket
    std::vector<double> probability;         // first-touch probability per bucket
    std::vector<double> probability_stderr;
    std::vector<double> mean_rho;            // E[rho at touch | touch in bucket]
    std::vector<double> mean_rho_stderr;
    double total_probability = 0.0;
};

FirstTouchDistribution first_touch_distribution_mc(const SvscParams& p, const McConfig& cfg, double barrier,
                                                   BarrierDirection direction, double expiry, int n_buckets);

}  // namespace svsc
