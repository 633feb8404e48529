#include "svsc/svsc_mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "svsc/bs_analytics.hpp"
#include "svsc/errors.hpp"

namespace svsc {

namespace {

constexpr double kRhoLimit = 1.0 - 1e-9;
constexpr std::int64_t kChunkSamples = 512;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Generator for sample `index`; independent of how samples are spread over threads.
std::mt19937_64 sample_rng(std::uint64_t seed, std::int64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index)));
}

struct Moments {
    std::vector<double> sum;
    std::vector<double> sumsq;
    explicit Moments(std::size_t m = 0) : sum(m, 0.0), sumsq(m, 0.0) {}
};

// Runs all samples through `path_fn(normals, sign, out)`, averaging antithetic pairs,
// and returns first and second moments per output.
template <class PathFn>
Moments run_samples(const McConfig& cfg, int n_steps, std::size_t n_out, PathFn&& path_fn) {
    const std::int64_t n_samples = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    const std::int64_t n_chunks = (n_samples + kChunkSamples - 1) / kChunkSamples;
    std::vector<Moments> chunks(static_cast<std::size_t>(n_chunks), Moments(n_out));
    std::atomic<std::int64_t> next{0};

    auto worker = [&]() {
        std::vector<double> z(static_cast<std::size_t>(3 * n_steps));
        std::vector<double> out(n_out), out_anti(n_out);
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            Moments& acc = chunks[static_cast<std::size_t>(c)];
            const std::int64_t begin = c * kChunkSamples;
            const std::int64_t end = std::min(n_samples, begin + kChunkSamples);
            for (std::int64_t s = begin; s < end; ++s) {
                auto rng = sample_rng(cfg.seed, s);
                std::normal_distribution<double> nd;
                for (auto& zi : z) zi = nd(rng);
                path_fn(z, 1.0, out);
                if (cfg.antithetic) {
                    path_fn(z, -1.0, out_anti);
                    for (std::size_t j = 0; j < n_out; ++j) out[j] = 0.5 * (out[j] + out_anti[j]);
                }
                for (std::size_t j = 0; j < n_out; ++j) {
                    acc.sum[j] += out[j];
                    acc.sumsq[j] += out[j] * out[j];
                }
            }
        }
    };

    const int n_threads = std::max(1, cfg.threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    Moments total(n_out);
    for (const auto& c : chunks)
        for (std::size_t j = 0; j < n_out; ++j) {
            total.sum[j] += c.sum[j];
            total.sumsq[j] += c.sumsq[j];
        }
    return total;
}

std::int64_t sample_count(const McConfig& cfg) { return cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths; }

PricingResult make_result(const Moments& m, std::size_t j, const McConfig& cfg) {
    const double n = static_cast<double>(sample_count(cfg));
    const double mean = m.sum[j] / n;
    const double var = n > 1.0 ? std::max(0.0, (m.sumsq[j] - n * mean * mean) / (n - 1.0)) : 0.0;
    return {mean, std::sqrt(var / n), cfg.n_paths, cfg.n_steps, cfg.seed};
}

// Probability that a Brownian bridge between log-levels a and c (same side of the
// barrier, measured from it) does not cross within a step of variance var_dt.
inline double bridge_survival(double a, double c, double var_dt) {
    if (var_dt <= 0.0) return 1.0;
    const double e = 2.0 * a * c / var_dt;
    return e > 50.0 ? 1.0 : -std::expm1(-e);
}

}  // namespace

void SvscParams::validate() const {
    heston.validate();
    if (!(gamma >= 0.0)) throw DomainError("SvscParams: gamma must be non-negative");
    if (!(rho_bar >= -1.0 && rho_bar <= 1.0)) throw DomainError("SvscParams: rho_bar must lie in [-1, 1]");
    if (!(epsilon >= 0.0)) throw DomainError("SvscParams: epsilon must be non-negative");
    if (!(rho_cs > -1.0 && rho_cs < 1.0)) throw DomainError("SvscParams: rho_cs must lie in (-1, 1)");
    if (!(market.spot > 0.0)) throw DomainError("SvscParams: spot must be positive");
}

double SvscParams::expected_correlation(double t) const {
    return rho_bar + (heston.rho - rho_bar) * std::exp(-gamma * t);
}

double correlation_matrix_determinant(double rho, double rho_cs) {
    return (1.0 - rho * rho) * (1.0 - rho_cs * rho_cs);
}

void McConfig::validate() const {
    if (n_paths < 1) throw DomainError("McConfig: n_paths must be at least 1");
    if (n_steps < 1) throw DomainError("McConfig: n_steps must be at least 1");
}

NormalTriple correlate(const NormalTriple& z, double rho, double rho_cs) {
    // Closed-form Cholesky factor of [[1, rho, rho_cs], [rho, 1, rho rho_cs], [rho_cs, rho rho_cs, 1]];
    // the (3,2) entry vanishes identically.
    return {z[0], rho * z[0] + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * z[1],
            rho_cs * z[0] + std::sqrt(1.0 - rho_cs * rho_cs) * z[2]};
}

bool simulate_step(McState& s, double dt, const NormalTriple& z, const SvscParams& p) {
    const auto w = correlate(z, s.rho, p.rho_cs);
    const double vp = std::max(s.v, 0.0);
    const double sq = std::sqrt(vp * dt);
    const HestonParams& h = p.heston;
    s.x += (p.market.drift() - 0.5 * vp) * dt + sq * w[0];
    s.v += h.beta * (h.v_bar - vp) * dt + h.alpha * sq * w[1];
    double r = s.rho + p.gamma * (p.rho_bar - s.rho) * dt +
               p.epsilon * std::sqrt(std::max(0.0, 1.0 - s.rho * s.rho)) * sq * w[2];
    const bool clamped = r > kRhoLimit || r < -kRhoLimit;
    s.rho = std::clamp(r, -kRhoLimit, kRhoLimit);
    return clamped;
}

namespace {

struct Tracker {
    double log_level;
    BarrierDirection direction;
    int last_step;
};

struct BookLayout {
    double dt = 0.0;
    int n_steps = 0;
    std::vector<int> expiry_step;        // per instrument
    std::vector<int> tracker_of;         // per instrument, -1 if none
    std::vector<Tracker> trackers;
};

int step_index(double expiry, double dt) {
    const double pos = expiry / dt;
    const double idx = std::round(pos);
    if (std::abs(idx - pos) > 1e-6 || idx < 1.0)
        throw DomainError("price_book_mc: instrument expiry does not fall on a simulation step");
    return static_cast<int>(idx);
}

BookLayout layout_book(const McConfig& cfg, std::span<const Instrument> book) {
    if (book.empty()) throw DomainError("price_book_mc: empty book");
    BookLayout lay;
    double horizon = 0.0;
    for (const auto& inst : book) {
        const double t = expiry_of(inst);
        if (!(t > 0.0)) throw DomainError("price_book_mc: instrument expiry must be positive");
        horizon = std::max(horizon, t);
    }
    lay.n_steps = cfg.n_steps;
    lay.dt = horizon / cfg.n_steps;
    for (const auto& inst : book) {
        const int step = step_index(expiry_of(inst), lay.dt);
        lay.expiry_step.push_back(step);
        int tracker = -1;
        const OneTouch* ot = std::get_if<OneTouch>(&inst);
        const BarrierOption* bo = std::get_if<BarrierOption>(&inst);
        if (ot || bo) {
            const double level = ot ? ot->barrier : bo->barrier;
            const BarrierDirection dir = ot ? ot->direction : bo->direction;
            if (!(level > 0.0)) throw DomainError("price_book_mc: barrier must be positive");
            const double ll = std::log(level);
            for (std::size_t k = 0; k < lay.trackers.size(); ++k)
                if (lay.trackers[k].log_level == ll && lay.trackers[k].direction == dir &&
                    lay.trackers[k].last_step == step)
                    tracker = static_cast<int>(k);
            if (tracker < 0) {
                lay.trackers.push_back({ll, dir, step});
                tracker = static_cast<int>(lay.trackers.size()) - 1;
            }
        }
        lay.tracker_of.push_back(tracker);
    }
    return lay;
}

double payoff(const Instrument& inst, double spot_t, double survival) {
    if (const auto* v = std::get_if<Vanilla>(&inst))
        return std::max(v->kind == OptionKind::Call ? spot_t - v->strike : v->strike - spot_t, 0.0);
    if (const auto* d = std::get_if<EuropeanDigital>(&inst))
        return (d->kind == DigitalKind::Above) == (spot_t > d->strike) ? 1.0 : 0.0;
    if (std::get_if<OneTouch>(&inst)) return 1.0 - survival;
    const auto& b = std::get<BarrierOption>(inst);
    const double k = b.underlying.strike;
    const double vanilla = std::max(b.underlying.kind == OptionKind::Call ? spot_t - k : k - spot_t, 0.0);
    return vanilla * (b.style == BarrierStyle::KnockOut ? survival : 1.0 - survival);
}

}  // namespace

std::vector<PricingResult> price_book_mc(const SvscParams& p, const McConfig& cfg, std::span<const Instrument> book,
                                         McDiagnostics* diag) {
    p.validate();
    cfg.validate();
    const BookLayout lay = layout_book(cfg, book);
    const std::size_t m = book.size();
    const double x0 = std::log(p.market.spot);
    const bool bridge = cfg.bridge_correction;
    std::atomic<std::int64_t> clamps{0};

    auto path_fn = [&](const std::vector<double>& z, double sign, std::vector<double>& out) {
        thread_local std::vector<double> x_path;
        thread_local std::vector<double> survival;
        x_path.assign(static_cast<std::size_t>(lay.n_steps) + 1, 0.0);
        survival.assign(lay.trackers.size(), 1.0);
        McState s{x0, p.heston.v0, p.heston.rho};
        x_path[0] = x0;
        for (std::size_t k = 0; k < lay.trackers.size(); ++k) {
            const auto& tr = lay.trackers[k];
            if (is_breached(x0, tr.log_level, tr.direction)) survival[k] = 0.0;
        }
        std::int64_t local_clamps = 0;
        for (int i = 0; i < lay.n_steps; ++i) {
            const double x_prev = s.x;
            const double var_dt = std::max(s.v, 0.0) * lay.dt;
            const NormalTriple zi{sign * z[3 * i], sign * z[3 * i + 1], sign * z[3 * i + 2]};
            local_clamps += simulate_step(s, lay.dt, zi, p) ? 1 : 0;
            x_path[static_cast<std::size_t>(i) + 1] = s.x;
            for (std::size_t k = 0; k < lay.trackers.size(); ++k) {
                const auto& tr = lay.trackers[k];
                if (survival[k] == 0.0 || i >= tr.last_step) continue;
                if (is_breached(s.x, tr.log_level, tr.direction)) {
                    survival[k] = 0.0;
                } else if (bridge) {
                    survival[k] *= bridge_survival(x_prev - tr.log_level, s.x - tr.log_level, var_dt);
                }
            }
        }
        if (local_clamps) clamps.fetch_add(local_clamps, std::memory_order_relaxed);
        for (std::size_t j = 0; j < m; ++j) {
            const int step = lay.expiry_step[j];
            const double spot_t = std::exp(x_path[static_cast<std::size_t>(step)]);
            const double surv = lay.tracker_of[j] >= 0 ? survival[static_cast<std::size_t>(lay.tracker_of[j])] : 1.0;
            out[j] = p.market.discount(step * lay.dt) * payoff(book[j], spot_t, surv);
        }
    };

    const Moments mom = run_samples(cfg, lay.n_steps, m, path_fn);
    std::vector<PricingResult> res;
    res.reserve(m);
    for (std::size_t j = 0; j < m; ++j) res.push_back(make_result(mom, j, cfg));
    if (diag) {
        diag->steps = cfg.n_paths * static_cast<std::int64_t>(lay.n_steps);
        diag->rho_clamps = clamps.load();
    }
    return res;
}

PricingResult price_vanilla_mc(const SvscParams& p, const McConfig& cfg, const Vanilla& opt) {
    const Instrument book[] = {opt};
    return price_book_mc(p, cfg, book).front();
}

PricingResult price_digital_mc(const SvscParams& p, const McConfig& cfg, const EuropeanDigital& dig) {
    const Instrument book[] = {dig};
    return price_book_mc(p, cfg, book).front();
}

PricingResult price_one_touch_mc(const SvscParams& p, const McConfig& cfg, const OneTouch& ot) {
    const Instrument book[] = {ot};
    return price_book_mc(p, cfg, book).front();
}

PricingResult price_barrier_mc(const SvscParams& p, const McConfig& cfg, const BarrierOption& opt) {
    const Instrument book[] = {opt};
    return price_book_mc(p, cfg, book).front();
}

SmilePoint smile_point_from_price(const RateMarket& mkt, double strike, double expiry, OptionKind kind,
                                  const PricingResult& res) {
    SmilePoint pt;
    pt.strike = strike;
    pt.price = res.price;
    pt.price_stderr = res.stderr_;
    const Vanilla opt{strike, expiry, kind};
    try {
        pt.vol = bs_implied_vol(res.price, mkt.with_vol(0.1), opt);
        const double vega = bs_vega(mkt.with_vol(pt.vol), opt);
        pt.vol_stderr = vega > 0.0 ? res.stderr_ / vega : 0.0;
    } catch (const DomainError&) {
        pt.flagged = true;
    }
    return pt;
}

std::vector<SmilePoint> svsc_smile(const SvscParams& p, const McConfig& cfg, std::span<const double> strikes,
                                  double expiry) {
    std::vector<Instrument> book;
    const double fwd = p.market.forward(expiry);
    for (double k : strikes) {
        if (!(k > 0.0)) throw DomainError("svsc_smile: strikes must be positive");
        book.push_back(Vanilla{k, expiry, k >= fwd ? OptionKind::Call : OptionKind::Put});
    }
    const auto res = price_book_mc(p, cfg, book);
    std::vector<SmilePoint> out;
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        const auto& v = std::get<Vanilla>(book[i]);
        out.push_back(smile_point_from_price(p.market, v.strike, expiry, v.kind, res[i]));
    }
    return out;
}

FirstTouchDistribution first_touch_distribution_mc(const SvscParams& p, const McConfig& cfg, double barrier,
                                                   BarrierDirection direction, double expiry, int n_buckets) {
    p.validate();
    cfg.validate();
    if (n_buckets < 1) throw DomainError("first_touch_distribution_mc: n_buckets must be at least 1");
    if (!(barrier > 0.0) || !(expiry > 0.0)) throw DomainError("first_touch_distribution_mc: bad barrier/expiry");
    const int n_steps = cfg.n_steps;
    const double dt = expiry / n_steps;
    const double lb = std::log(barrier);
    const double x0 = std::log(p.market.spot);
    const std::size_t nb = static_cast<std::size_t>(n_buckets);
    const bool bridge = cfg.bridge_correction;
    auto bucket_of = [&](double t) {
        return std::min<std::size_t>(nb - 1, static_cast<std::size_t>(t / expiry * n_buckets));
    };

    // Outputs per bucket: weight, weight * rho, weight + weight * rho (for the covariance).
    auto path_fn = [&](const std::vector<double>& z, double sign, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        auto add = [&](std::size_t b, double w, double r) {
            out[3 * b] += w;
            out[3 * b + 1] += w * r;
            out[3 * b + 2] += w + w * r;
        };
        McState s{x0, p.heston.v0, p.heston.rho};
        if (is_breached(x0, lb, direction)) {
            add(0, 1.0, s.rho);
            return;
        }
        double alive = 1.0;
        for (int i = 0; i < n_steps && alive > 0.0; ++i) {
            const double x_prev = s.x;
            const double rho_prev = s.rho;
            const double var_dt = std::max(s.v, 0.0) * dt;
            const NormalTriple zi{sign * z[3 * i], sign * z[3 * i + 1], sign * z[3 * i + 2]};
            simulate_step(s, dt, zi, p);
            double hit = 0.0;
            if (is_breached(s.x, lb, direction))
                hit = 1.0;
            else if (bridge)
                hit = 1.0 - bridge_survival(x_prev - lb, s.x - lb, var_dt);
            if (hit > 0.0) {
                const double t_mid = (i + 0.5) * dt;
                const double rho_touch = bridge ? 0.5 * (rho_prev + s.rho) : s.rho;
                add(bucket_of(t_mid), alive * hit, rho_touch);
                alive *= 1.0 - hit;
            }
        }
    };

    const Moments mom = run_samples(cfg, n_steps, 3 * nb, path_fn);
    const double n = static_cast<double>(sample_count(cfg));
    auto mean = [&](std::size_t j) { return mom.sum[j] / n; };
    auto var = [&](std::size_t j) {
        const double mu = mean(j);
        return n > 1.0 ? std::max(0.0, (mom.sumsq[j] - n * mu * mu) / (n - 1.0)) : 0.0;
    };

    FirstTouchDistribution d;
    for (std::size_t b = 0; b < nb; ++b) {
        d.bucket_end.push_back(expiry * static_cast<double>(b + 1) / n_buckets);
        const double w = mean(3 * b);
        const double wr = mean(3 * b + 1);
        d.probability.push_back(w);
        d.probability_stderr.push_back(std::sqrt(var(3 * b) / n));
        d.total_probability += w;
        if (w > 0.0) {
            const double ratio = wr / w;
            const double cov = 0.5 * (var(3 * b + 2) - var(3 * b) - var(3 * b + 1));
            const double v_ratio = (var(3 * b + 1) - 2.0 * ratio * cov + ratio * ratio * var(3 * b)) / (w * w);
            d.mean_rho.push_back(ratio);
            d.mean_rho_stderr.push_back(std::sqrt(std::max(0.0, v_ratio) / n));
        } else {
            d.mean_rho.push_back(0.0);
            d.mean_rho_stderr.push_back(0.0);
        }
    }
    return d;
}

}  // namespace svsc
