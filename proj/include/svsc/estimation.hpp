#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svsc {

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    int n_obs = 0;
};

/// y = intercept + slope * x by least squares. Pairs where either value is NaN are dropped.
RegressionResult ols(std::span<const double> x, std::span<const double> y);

/// Slope of d sigma^2(T2) on d sigma^2(T1) implied by variance mean reversion beta.
double beta_slope(double beta, double t1, double t2);
/// Inverse of beta_slope on (0, 50]; throws EstimationError outside the attainable range.
double estimate_beta(double slope, double t1, double t2);

/// Slope of dRR(T2) on dRR(T1) implied by correlation mean reversion gamma.
double gamma_slope(double beta, double gamma, double t1, double t2);
double estimate_gamma(double slope, double t1, double t2, double beta);

struct RrApproxParams {
    double scale = 1.0;  // B * alpha / beta
    double beta = 2.0;
    double gamma = 4.0;
    double rho_bar = 0.0;
    double rho0 = 0.0;
};

/// Closed-form 25-delta risk reversal term structure.
double rr_approx(const RrApproxParams& p, double expiry);
/// Scale making rr_approx hit `rr` at `expiry`.
double fit_rr_scale(RrApproxParams p, double expiry, double rr);

struct RollingSlope {
    std::size_t end_row = 0;  // last row of the window
    RegressionResult fit;
};

/// Rolling regression of daily RR changes on daily log-spot returns, one result per window end.
std::vector<RollingSlope> rr_beta(std::span<const double> spot, std::span<const double> rr, std::size_t window);

/// xi from the risk reversal beta, the risk reversal level and rho_bar (rho0 = rho_bar assumed).
double estimate_xi(double rr_beta, double rr_level, double expiry, double beta, double gamma, double rho_bar);

// ---------------------------------------------------------------------------
// Market time series

/// Parses tenor labels such as "1m", "3m", "1y", "2w".
double parse_tenor(const std::string& label);

struct MarketSeries {
    std::vector<std::string> dates;
    std::vector<double> spot;
    std::map<std::string, std::vector<double>> atm;  // tenor label -> decimal vols
    std::map<std::string, std::vector<double>> rr;   // tenor label -> signed decimal vol points
    std::optional<std::vector<double>> rho_bar;      // optional per-row correlation column

    std::size_t size() const { return dates.size(); }
};

/// Reads `date,spot,atm_<tenor>...,rr25_<tenor>...[,rho_bar]`. Empty cells are missing data.
/// Column names may carry a unit tag, e.g. atm_3m[dec]; any tag other than [dec] is rejected.
/// Throws EstimationError with the offending line number on malformed input.
MarketSeries parse_market_csv(std::istream& in);

struct EstimationOptions {
    std::string short_tenor = "3m";
    std::string long_tenor = "1y";
    std::string xi_tenor = "3m";
    std::size_t window = 252;
    // rho_bar per row: the CSV column if present, else this constant if set, else a per-row
    // Heston fit (alpha fixed, zero butterfly) to ATM and risk reversal at xi_tenor.
    std::optional<double> rho_bar;
    double calibration_alpha = 0.3;
};

struct XiPoint {
    std::string date;
    double rr_beta = 0.0;
    double rr_beta_stderr = 0.0;
    double rr = 0.0;
    double rho_bar = 0.0;
    double xi = 0.0;
};

struct EstimationReport {
    double beta = 0.0;
    double gamma = 0.0;
    double xi = 0.0;  // median over dates; robust to days where the risk reversal is near zero
    double xi_mean = 0.0;
    RegressionResult beta_regression;
    RegressionResult gamma_regression;
    std::vector<XiPoint> xi_series;
    std::vector<std::string> warnings;
};

EstimationReport run_estimation(const MarketSeries& series, const EstimationOptions& opt);

/// Daily-state generator used to exercise the estimators: SVSC dynamics with ATM vols from the
/// zero vol-of-vol formula and risk reversals from rr_approx, plus Gaussian observation noise.
struct SyntheticSpec {
    double beta = 2.0, gamma = 4.0, xi = 7.0;
    double v_bar = 0.01, v0 = 0.01, alpha = 0.25;
    double rho_bar = -0.3, rho0 = -0.3, epsilon = 10.0;
    double rr_scale = 0.2;     // B alpha / beta
    double vol_noise = 0.0;    // std of additive noise on ATM vols
    double rr_noise = 0.0;     // std of additive noise on risk reversals
    std::size_t n_days = 1260;
    int substeps = 10;
    std::uint64_t seed = 1;
    std::vector<std::string> tenors{"3m", "1y"};
};

MarketSeries synthetic_market_series(const SyntheticSpec& spec);

void write_market_csv(std::ostream& out, const MarketSeries& s);

}  // namespace svsc
