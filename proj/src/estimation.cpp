#include "svsc/estimation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "svsc/approx_engine.hpp"
#include "svsc/errors.hpp"
#include "svsc/heston.hpp"
#include "svsc/numerics.hpp"
#include "svsc/svsc_mc.hpp"

namespace svsc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxRate = 50.0;
constexpr double kMinRate = 1e-6;

std::vector<double> diffs(const std::vector<double>& x) {
    std::vector<double> d(x.size(), kNaN);
    for (std::size_t i = 1; i < x.size(); ++i) d[i] = x[i] - x[i - 1];
    return d;
}

std::vector<double> squared(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v * v; });
    return y;
}

std::vector<double> log_returns(const std::vector<double>& s) {
    std::vector<double> r(s.size(), kNaN);
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > 0.0 && s[i - 1] > 0.0) r[i] = std::log(s[i] / s[i - 1]);
    return r;
}

double solve_rate(const std::function<double(double)>& slope_of, double slope, const char* what) {
    const double s_lo = slope_of(kMinRate), s_hi = slope_of(kMaxRate);
    const double lo = std::min(s_lo, s_hi), hi = std::max(s_lo, s_hi);
    if (!(slope > lo && slope < hi)) {
        std::ostringstream os;
        os << what << ": slope " << slope << " outside attainable range (" << lo << ", " << hi << ")";
        throw EstimationError(os.str());
    }
    return numerics::find_root([&](double r) { return slope_of(r) - slope; }, kMinRate, kMaxRate, 1e-13);
}

const std::vector<double>& column(const std::map<std::string, std::vector<double>>& m, const std::string& tenor,
                                  const char* kind) {
    auto it = m.find(tenor);
    if (it == m.end()) throw EstimationError(std::string("missing column ") + kind + tenor);
    return it->second;
}

double median(std::vector<double> v) {
    if (v.empty()) return kNaN;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

RegressionResult ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw EstimationError("ols: x and y differ in length");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isfinite(x[i]) && std::isfinite(y[i])) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    const auto n = static_cast<Eigen::Index>(xs.size());
    if (n < 3) throw EstimationError("ols: need at least 3 complete observations");

    Eigen::MatrixXd a(n, 2);
    const Eigen::Map<const Eigen::VectorXd> xv(xs.data(), n), yv(ys.data(), n);
    a.col(0).setOnes();
    a.col(1) = xv;
    const double x_var = (xv.array() - xv.mean()).square().sum();
    if (!(x_var > 1e-300)) throw EstimationError("ols: regressor has zero variance (degenerate regressor)");

    const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(yv);
    const Eigen::VectorXd resid = yv - a * coef;
    const double ss_res = resid.squaredNorm();
    const double ss_tot = (yv.array() - yv.mean()).square().sum();

    RegressionResult r;
    r.intercept = coef(0);
    r.slope = coef(1);
    r.n_obs = static_cast<int>(n);
    r.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    r.slope_stderr = n > 2 ? std::sqrt(ss_res / static_cast<double>(n - 2) / x_var) : 0.0;
    return r;
}

double beta_slope(double beta, double t1, double t2) {
    if (!(t1 > 0.0 && t2 > t1)) throw DomainError("beta_slope: need 0 < T1 < T2");
    // (T1/T2) (1 - e^{-b T2}) / (1 - e^{-b T1}), via expm1 so small beta is exact
    return (t1 / t2) * std::expm1(-beta * t2) / std::expm1(-beta * t1);
}

double estimate_beta(double slope, double t1, double t2) {
    return solve_rate([&](double b) { return beta_slope(b, t1, t2); }, slope, "estimate_beta");
}

double gamma_slope(double beta, double gamma, double t1, double t2) {
    if (!(t1 > 0.0 && t2 > t1)) throw DomainError("gamma_slope: need 0 < T1 < T2");
    return d_factors(beta, gamma, t2).d2 / d_factors(beta, gamma, t1).d2 * std::sqrt(t1 / t2);
}

double estimate_gamma(double slope, double t1, double t2, double beta) {
    return solve_rate([&](double g) { return gamma_slope(beta, g, t1, t2); }, slope, "estimate_gamma");
}

double rr_approx(const RrApproxParams& p, double expiry) {
    if (!(expiry > 0.0)) throw DomainError("rr_approx: expiry must be positive");
    const auto f = d_factors(p.beta, p.gamma, expiry);
    return p.scale / std::sqrt(expiry) * (p.rho_bar * f.d1 + (p.rho0 - p.rho_bar) * f.d2);
}

double fit_rr_scale(RrApproxParams p, double expiry, double rr) {
    p.scale = 1.0;
    const double unit = rr_approx(p, expiry);
    if (unit == 0.0) throw EstimationError("fit_rr_scale: zero correlation gives no risk reversal to fit");
    return rr / unit;
}

std::vector<RollingSlope> rr_beta(std::span<const double> spot, std::span<const double> rr, std::size_t window) {
    if (spot.size() != rr.size()) throw EstimationError("rr_beta: spot and risk reversal differ in length");
    if (window < 60) throw EstimationError("rr_beta: window must be at least 60 observations");
    if (spot.size() < window + 1) throw EstimationError("rr_beta: series shorter than one window");
    const std::vector<double> ret = log_returns({spot.begin(), spot.end()});
    const std::vector<double> drr = diffs({rr.begin(), rr.end()});
    std::vector<RollingSlope> out;
    // window of `window` daily changes ending at row e
    for (std::size_t e = window; e < spot.size(); ++e) {
        const std::size_t b = e + 1 - window;
        RollingSlope rs;
        rs.end_row = e;
        rs.fit = ols(std::span(ret).subspan(b, window), std::span(drr).subspan(b, window));
        out.push_back(rs);
    }
    return out;
}

double estimate_xi(double rr_beta_val, double rr_level, double expiry, double beta, double gamma, double rho_bar) {
    if (rr_level == 0.0) throw EstimationError("estimate_xi: risk reversal is zero; xi is undefined on flat skew days");
    if (!(std::abs(rho_bar) < 1.0)) throw EstimationError("estimate_xi: |rho_bar| must be below 1");
    const auto f = d_factors(beta, gamma, expiry);
    return rr_beta_val / rr_level * (f.d1 / f.d2) * (rho_bar / std::sqrt(1.0 - rho_bar * rho_bar));
}

// ---------------------------------------------------------------------------

double parse_tenor(const std::string& label) {
    if (label.size() < 2) throw EstimationError("bad tenor label '" + label + "'");
    const char unit = static_cast<char>(std::tolower(static_cast<unsigned char>(label.back())));
    double n = 0.0;
    try {
        std::size_t used = 0;
        n = std::stod(label.substr(0, label.size() - 1), &used);
        if (used != label.size() - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw EstimationError("bad tenor label '" + label + "'");
    }
    switch (unit) {
        case 'd': return n / 365.0;
        case 'w': return n / 52.0;
        case 'm': return n / 12.0;
        case 'y': return n;
        default: throw EstimationError("bad tenor unit in '" + label + "'");
    }
}

MarketSeries parse_market_csv(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.pop_back();
            while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.erase(cell.begin());
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    auto fail = [](std::size_t line_no, const std::string& msg) {
        throw EstimationError("line " + std::to_string(line_no) + ": " + msg);
    };

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw EstimationError("line 1: empty input");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    enum class Col { Date, Spot, Atm, Rr, RhoBar };
    struct Target { Col kind; std::string tenor; };
    std::vector<Target> cols;
    MarketSeries s;
    for (auto name : split(line)) {
        if (auto lb = name.find('['); lb != std::string::npos) {
            const std::string tag = name.substr(lb);
            if (tag != "[dec]") fail(line_no, "unit tag " + tag + " on column " + name + " (only [dec] is accepted)");
            name.erase(lb);
        }
        if (name == "date") cols.push_back({Col::Date, {}});
        else if (name == "spot") cols.push_back({Col::Spot, {}});
        else if (name == "rho_bar") { cols.push_back({Col::RhoBar, {}}); s.rho_bar.emplace(); }
        else if (name.rfind("atm_", 0) == 0) {
            const std::string t = name.substr(4);
            parse_tenor(t);
            cols.push_back({Col::Atm, t});
            s.atm[t];
        } else if (name.rfind("rr25_", 0) == 0) {
            const std::string t = name.substr(5);
            parse_tenor(t);
            cols.push_back({Col::Rr, t});
            s.rr[t];
        } else {
            fail(line_no, "unknown column '" + name + "'");
        }
    }
    if (cols.empty() || cols.front().kind != Col::Date) fail(line_no, "first column must be 'date'");
    if (std::none_of(cols.begin(), cols.end(), [](const auto& c) { return c.kind == Col::Spot; }))
        fail(line_no, "missing 'spot' column");

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != cols.size())
            fail(line_no, "expected " + std::to_string(cols.size()) + " fields, got " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto& c = cols[j];
            if (c.kind == Col::Date) {
                const std::string& d = cells[j];
                const bool iso = d.size() == 10 && d[4] == '-' && d[7] == '-' &&
                                 std::all_of(d.begin(), d.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) || ch == '-'; });
                if (!iso) fail(line_no, "date '" + d + "' is not ISO YYYY-MM-DD");
                if (!s.dates.empty() && d <= s.dates.back()) fail(line_no, "dates must be strictly increasing");
                s.dates.push_back(d);
                continue;
            }
            double v = kNaN;
            if (!cells[j].empty()) {
                try {
                    std::size_t used = 0;
                    v = std::stod(cells[j], &used);
                    if (used != cells[j].size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    fail(line_no, "cannot parse number '" + cells[j] + "'");
                }
            }
            switch (c.kind) {
                case Col::Spot:
                    if (std::isfinite(v) && !(v > 0.0)) fail(line_no, "spot must be positive");
                    s.spot.push_back(v);
                    break;
                case Col::Atm:
                    if (std::isfinite(v) && !(v > 0.0)) fail(line_no, "ATM vol must be positive");
                    s.atm[c.tenor].push_back(v);
                    break;
                case Col::Rr: s.rr[c.tenor].push_back(v); break;
                case Col::RhoBar:
                    if (std::isfinite(v) && !(std::abs(v) < 1.0)) fail(line_no, "rho_bar must lie in (-1, 1)");
                    s.rho_bar->push_back(v);
                    break;
                case Col::Date: break;
            }
        }
    }
    if (s.dates.empty()) throw EstimationError("line " + std::to_string(line_no) + ": no data rows");
    return s;
}

void write_market_csv(std::ostream& out, const MarketSeries& s) {
    out << "date,spot";
    for (const auto& [t, _] : s.atm) out << ",atm_" << t;
    for (const auto& [t, _] : s.rr) out << ",rr25_" << t;
    if (s.rho_bar) out << ",rho_bar";
    out << '\n';
    auto cell = [&](double v) {
        out << ',';
        if (std::isfinite(v)) out << v;
    };
    out.precision(10);
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.dates[i];
        cell(s.spot[i]);
        for (const auto& [t, v] : s.atm) cell(v[i]);
        for (const auto& [t, v] : s.rr) cell(v[i]);
        if (s.rho_bar) cell((*s.rho_bar)[i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

EstimationReport run_estimation(const MarketSeries& series, const EstimationOptions& opt) {
    EstimationReport rep;
    const double t1 = parse_tenor(opt.short_tenor), t2 = parse_tenor(opt.long_tenor);
    const double tx = parse_tenor(opt.xi_tenor);

    const auto dv1 = diffs(squared(column(series.atm, opt.short_tenor, "atm_")));
    const auto dv2 = diffs(squared(column(series.atm, opt.long_tenor, "atm_")));
    rep.beta_regression = ols(dv1, dv2);
    rep.beta = estimate_beta(rep.beta_regression.slope, t1, t2);

    const auto drr1 = diffs(column(series.rr, opt.short_tenor, "rr25_"));
    const auto drr2 = diffs(column(series.rr, opt.long_tenor, "rr25_"));
    rep.gamma_regression = ols(drr1, drr2);
    rep.gamma = estimate_gamma(rep.gamma_regression.slope, t1, t2, rep.beta);

    const auto& rr = column(series.rr, opt.xi_tenor, "rr25_");
    const auto betas = rr_beta(series.spot, rr, opt.window);

    std::optional<HestonParams> warm;
    std::vector<double> xis;
    for (const auto& rs : betas) {
        const std::size_t i = rs.end_row;
        if (!std::isfinite(rr[i]) || rr[i] == 0.0) continue;
        double rho = kNaN;
        if (series.rho_bar) {
            rho = (*series.rho_bar)[i];
        } else if (opt.rho_bar) {
            rho = *opt.rho_bar;
        } else {
            const auto& atm = column(series.atm, opt.xi_tenor, "atm_");
            if (!std::isfinite(atm[i])) continue;
            // zero-butterfly quotes at the 25-delta strikes
            const RateMarket mkt{series.spot[i], 0.0, 0.0};
            const double vc = atm[i] + 0.5 * rr[i], vp = atm[i] - 0.5 * rr[i];
            std::vector<VolQuote> q{
                {strike_for_delta(mkt.with_vol(vp), -0.25, tx, OptionKind::Put), vp, tx},
                {mkt.forward(tx), atm[i], tx},
                {strike_for_delta(mkt.with_vol(vc), 0.25, tx, OptionKind::Call), vc, tx}};
            try {
                const auto cal = heston_calibrate_fixed_alpha(q, rep.beta, opt.calibration_alpha, mkt,
                                                              warm ? &*warm : nullptr);
                warm = cal.params;
                rho = cal.params.rho;
            } catch (const std::exception& e) {
                rep.warnings.push_back(series.dates[i] + ": correlation fit failed: " + e.what());
                continue;
            }
        }
        if (!std::isfinite(rho)) continue;
        XiPoint xp;
        xp.date = series.dates[i];
        xp.rr_beta = rs.fit.slope;
        xp.rr_beta_stderr = rs.fit.slope_stderr;
        xp.rr = rr[i];
        xp.rho_bar = rho;
        try {
            xp.xi = estimate_xi(xp.rr_beta, xp.rr, tx, rep.beta, rep.gamma, rho);
        } catch (const EstimationError& e) {
            rep.warnings.push_back(xp.date + ": " + e.what());
            continue;
        }
        xis.push_back(xp.xi);
        rep.xi_series.push_back(xp);
    }
    if (xis.empty()) throw EstimationError("run_estimation: no date produced a xi estimate");
    rep.xi_mean = 0.0;
    for (double x : xis) rep.xi_mean += x;
    rep.xi_mean /= static_cast<double>(xis.size());
    rep.xi = median(xis);
    return rep;
}

// ---------------------------------------------------------------------------

MarketSeries synthetic_market_series(const SyntheticSpec& spec) {
    if (!(spec.epsilon > 0.0) || !(std::abs(spec.xi) < spec.epsilon))
        throw DomainError("synthetic_market_series: need |xi| < epsilon so rho_cs lies in (-1, 1)");
    SvscParams p;
    p.heston = {spec.beta, spec.v_bar, spec.v0, spec.alpha, spec.rho0};
    p.gamma = spec.gamma;
    p.rho_bar = spec.rho_bar;
    p.epsilon = spec.epsilon;
    p.rho_cs = spec.xi / spec.epsilon;
    p.market = {1.0, 0.0, 0.0};
    p.validate();

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> nd;
    const double dt = 1.0 / 252.0 / spec.substeps;

    MarketSeries s;
    s.rho_bar.emplace();
    std::vector<double> tenors;
    for (const auto& t : spec.tenors) {
        tenors.push_back(parse_tenor(t));
        s.atm[t];
        s.rr[t];
    }
    const double t_xi = tenors.front();

    McState st{0.0, spec.v0, spec.rho0};
    for (std::size_t day = 0; day < spec.n_days; ++day) {
        if (day > 0)
            for (int k = 0; k < spec.substeps; ++k) simulate_step(st, dt, {nd(rng), nd(rng), nd(rng)}, p);
        char buf[32];
        // synthetic calendar: day index encoded as a valid, increasing ISO date
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", static_cast<int>(2000 + day / 336 % 8000),
                      static_cast<int>(1 + (day / 28) % 12), static_cast<int>(1 + day % 28));
        s.dates.emplace_back(buf);
        s.spot.push_back(std::exp(st.x));
        const double v = std::max(st.v, 0.0);
        for (std::size_t j = 0; j < tenors.size(); ++j) {
            const double T = tenors[j];
            const double var = spec.v_bar + (v - spec.v_bar) * (-std::expm1(-spec.beta * T)) / (spec.beta * T);
            s.atm[spec.tenors[j]].push_back(std::sqrt(std::max(var, 1e-8)) + spec.vol_noise * nd(rng));
            const RrApproxParams rp{spec.rr_scale, spec.beta, spec.gamma, spec.rho_bar, st.rho};
            s.rr[spec.tenors[j]].push_back(rr_approx(rp, T) + spec.rr_noise * nd(rng));
        }
        // what a same-tenor Heston fit sees: the effective constant correlation
        s.rho_bar->push_back(
            effective_correlation({spec.rho_bar, st.rho, spec.beta, spec.gamma, t_xi}).value);
    }
    return s;
}

}  // namespace svsc
