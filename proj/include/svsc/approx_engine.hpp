#pragma once

#include <string>
#include <vector>

#include "svsc/heston.hpp"
#include "svsc/instruments.hpp"
#include "svsc/svsc_mc.hpp"

namespace svsc {

/// The three marked parameters the approximation needs.
struct SvscMarks {
    double beta = 2.0;   // variance mean reversion
    double gamma = 4.0;  // correlation mean reversion
    double xi = 7.0;     // rho_cs * epsilon
};

struct DFactors {
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Weights of the constant and decaying parts of the correlation term structure in the
/// risk-reversal premium. Continuous across gamma == beta; both vanish like beta*T/2 as T -> 0.
DFactors d_factors(double beta, double gamma, double expiry);

struct EffectiveCorrInputs {
    double rho_bar = 0.0;
    double rho0 = 0.0;
    double beta = 2.0;
    double gamma = 4.0;
    double expiry = 1.0;
};

struct ClampedValue {
    double value = 0.0;
    bool clamped = false;
};

/// Constant correlation reproducing the risk-reversal premium of the exponential
/// correlation term structure; clamped to [-0.99, 0.99].
ClampedValue effective_correlation(const EffectiveCorrInputs& in);

/// Strike of the short replication leg. Solves, under flat Black-Scholes at mkt.vol,
///   price(K') * sqrt(K / K') = vanilla(K) - knockout(K, B).
/// `kind` is the kind of the barrier option's underlying.
double reflected_strike(const BsMarket& mkt, double strike, double barrier, double expiry, OptionKind kind);

/// E[rho(t) | S(t) = B] from the bridge-conditioned correlation dynamics, two-pass refinement
/// of the sqrt(1 - rho'^2) factor.
double conditional_expected_correlation(double t, double barrier, double forward_t, double rho_h, double gamma,
                                        double xi, double sigma2);

/// Constant Heston correlation used to value the replication at an unwind at time t.
ClampedValue unwind_correlation(double t, double expiry, double conditional_rho, double rho_h, double beta,
                                double gamma);

/// Approximate probability of touching `barrier` before t, from the Black-Scholes touch
/// probability corrected with twice the Heston-minus-Black-Scholes digital difference.
double first_touch_probability(double t, double barrier, BarrierDirection direction, const HestonParams& hp,
                               const RateMarket& mkt, double atm_vol);

struct ReplicationLeg {
    Instrument instrument;  // Vanilla or EuropeanDigital
    double quantity = 0.0;
};

struct ReplicationPortfolio {
    std::vector<ReplicationLeg> legs;
    double strike = 0.0;
    double reflected_strike = 0.0;
    double barrier = 0.0;
    double expiry = 0.0;
};

/// The vanilla at K long, and the opposite vanilla at the reflected strike short in
/// quantity sqrt(K/K'). Worth zero along the barrier in Black-Scholes at the given vol.
ReplicationPortfolio barrier_replication(const BsMarket& mkt, const Vanilla& underlying, double barrier);

struct UnwindBucket {
    double t_start = 0.0, t_mid = 0.0, t_end = 0.0;
    double p_start = 0.0, p_end = 0.0;
    double discount = 1.0;
    double conditional_rho = 0.0;
    double unwind_rho = 0.0;
    double local_variance = 0.0;
    double replication_value = 0.0;
};

struct UnwindGrid {
    std::vector<UnwindBucket> buckets;
    double total_probability() const { return buckets.empty() ? 0.0 : buckets.back().p_end; }
};

struct ApproxDiagnostics {
    double replication_value = 0.0;    // v_R(0, S0) under the calibrated Heston model
    double unwind_value = 0.0;         // v_U
    double heston_barrier_value = 0.0; // v_R(0) - v_U
    double heston_vanilla_value = 0.0;
    double no_touch_probability = 1.0;
    double market_vanilla_value = 0.0;
    double final_price = 0.0;
    double atm_vol = 0.0;
    HestonParams heston;
    std::vector<std::string> warnings;
};

struct ApproxResult {
    PricingResult result;
    ApproxDiagnostics diagnostics;
    ReplicationPortfolio replication;
    UnwindGrid grid;
};

/// Three vol quotes at one tenor.
struct TenorQuotes {
    double expiry = 0.0;
    std::vector<VolQuote> quotes;
};

/// Externally observed vanilla price (the "market" price used in the final normalization).
struct MarketVanilla {
    Vanilla option;
    double price = 0.0;
};

/// Vanilla market: quotes per tenor, calibrated to Heston once at construction (beta fixed).
/// Tenors without quotes use the calibration of the nearest quoted tenor. Immutable after
/// construction, so concurrent pricing against one instance is safe.
class VolMarket {
public:
    VolMarket(RateMarket rates, std::vector<TenorQuotes> tenors, double beta,
              std::vector<MarketVanilla> vanillas = {});

    const RateMarket& rates() const { return rates_; }
    double beta() const { return beta_; }
    const CalibrationReport& heston_at(double t) const;
    // Heston implied vol at the forward for tenor t.
    double atm_vol(double t) const;
    // Observed price if one was supplied (directly or through parity), else the calibrated Heston price.
    double vanilla_price(const Vanilla& opt) const;
    const std::vector<TenorQuotes>& tenors() const { return tenors_; }

private:
    std::size_t nearest(double t) const;

    RateMarket rates_;
    std::vector<TenorQuotes> tenors_;
    double beta_;
    std::vector<CalibrationReport> calibrations_;
    std::vector<MarketVanilla> vanillas_;
};

enum class DupirePoint { Barrier, AtTheMoney };
enum class UnwindRhoAnchor { RhoH, ConditionalOnly };

struct ApproxOptions {
    int n_buckets = 10;
    DupirePoint dupire_point = DupirePoint::Barrier;
    UnwindRhoAnchor rho_anchor = UnwindRhoAnchor::RhoH;
};

/// Out-of-the-money knockout (down-and-out call with B <= K, up-and-out put with B >= K).
ApproxResult price_otm_barrier(const VolMarket& market, const SvscMarks& marks, const BarrierOption& opt,
                               const ApproxOptions& options = {});

/// One touch paying at expiry, replicated with two European digitals struck at the barrier.
ApproxResult price_one_touch(const VolMarket& market, const SvscMarks& marks, const OneTouch& ot,
                             const ApproxOptions& options = {});

/// Knock-out forward (pays S_T - K if the barrier is never touched) as a strip of one touches.
double price_barrier_forward(const VolMarket& market, const SvscMarks& marks, double strike, double barrier,
                             BarrierDirection direction, double expiry, const ApproxOptions& options = {});

/// In-the-money knockout through barrier put/call parity with the out-of-the-money counterpart.
ApproxResult price_itm_barrier(const VolMarket& market, const SvscMarks& marks, const BarrierOption& opt,
                               const ApproxOptions& options = {});

/// Any single-barrier option: knock-ins through in-out parity against the market vanilla.
ApproxResult price_barrier(const VolMarket& market, const SvscMarks& marks, const BarrierOption& opt,
                           const ApproxOptions& options = {});

}  // namespace svsc
