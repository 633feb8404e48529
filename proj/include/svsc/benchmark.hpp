#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svsc/approx_engine.hpp"
#include "svsc/svsc_mc.hpp"

namespace svsc {

/// Approximation-versus-simulation comparison. Vanilla quotes, the underlying vanillas and
/// the barrier/touch payoffs all come from one SVSC simulation, so the approximation is
/// checked against a market that is exactly consistent with the model it approximates.
struct BenchmarkConfig {
    SvscParams model;
    McConfig mc;
    ApproxOptions approx;
    // Quote strikes at tenor t are F(t) * m^{sqrt(t / quote_ref_tenor)}.
    std::vector<double> quote_moneyness{0.9554, 1.0, 1.0438};
    double quote_ref_tenor = 0.5;
    // Also price every instrument by simulation under the calibrated Heston model.
    bool heston_mc = false;
    // Marks for the approximation; the model's own (beta, gamma, rho_cs * epsilon) if unset.
    std::optional<SvscMarks> marks;
};

struct BenchmarkRow {
    Instrument instrument;
    PricingResult model;
    double approx = std::numeric_limits<double>::quiet_NaN();
    double heston = std::numeric_limits<double>::quiet_NaN();
    double heston_stderr = std::numeric_limits<double>::quiet_NaN();
    double black_scholes = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
    std::string error;  // non-empty if the approximation failed for this row

    double approx_diff() const { return model.price - approx; }
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    std::vector<TenorQuotes> quotes;
    McDiagnostics diagnostics;
    std::vector<std::string> warnings;
    double mc_seconds = 0.0;
    double approx_seconds = 0.0;

    bool all_ok() const;
};

SvscMarks marks_from(const SvscParams& p);

/// Tenors the approximation will ask the vol market for, snapped to simulation steps.
std::vector<double> required_tenors(std::span<const Instrument> book, const RateMarket& mkt, int n_buckets,
                                    double dt);

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, std::span<const Instrument> book);

}  // namespace svsc
