#include "svsc/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>

#include "svsc/errors.hpp"
#include "svsc/parallel.hpp"

namespace svsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double max_expiry(std::span<const Instrument> book) {
    double t = 0.0;
    for (const auto& i : book) t = std::max(t, expiry_of(i));
    return t;
}

std::optional<Vanilla> underlying_of(const Instrument& inst) {
    if (const auto* b = std::get_if<BarrierOption>(&inst)) return b->underlying;
    if (const auto* v = std::get_if<Vanilla>(&inst)) return *v;
    return std::nullopt;
}

double bs_price(const BsMarket& m, const Instrument& inst) {
    return std::visit(
        [&](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Vanilla>) return bs_vanilla_price(m, x);
            else if constexpr (std::is_same_v<T, EuropeanDigital>) return bs_digital_price(m, x);
            else if constexpr (std::is_same_v<T, OneTouch>) return bs_one_touch_price(m, x);
            else return bs_barrier_price(m, x);
        },
        inst);
}

double approx_price(const VolMarket& vm, const SvscMarks& marks, const ApproxOptions& opt, const Instrument& inst,
                    std::vector<std::string>& warnings) {
    return std::visit(
        [&](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Vanilla>) {
                return vm.vanilla_price(x);
            } else if constexpr (std::is_same_v<T, EuropeanDigital>) {
                return heston_digital_price(vm.heston_at(x.expiry).params, vm.rates(), x);
            } else if constexpr (std::is_same_v<T, OneTouch>) {
                auto r = price_one_touch(vm, marks, x, opt);
                warnings = r.diagnostics.warnings;
                return r.result.price;
            } else {
                auto r = price_barrier(vm, marks, x, opt);
                warnings = r.diagnostics.warnings;
                return r.result.price;
            }
        },
        inst);
}

}  // namespace

bool BenchmarkReport::all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.error.empty(); });
}

SvscMarks marks_from(const SvscParams& p) { return {p.heston.beta, p.gamma, p.xi()}; }

std::vector<double> required_tenors(std::span<const Instrument> book, const RateMarket& mkt, int n_buckets,
                                    double dt) {
    std::vector<double> t;
    for (const auto& inst : book) {
        const double T = expiry_of(inst);
        t.push_back(T);
        // the barrier forward behind an in-the-money barrier needs one touches at each bucket midpoint
        const auto* b = std::get_if<BarrierOption>(&inst);
        if (b && !is_otm_barrier(*b) && mkt.drift() != 0.0)
            for (int i = 0; i < n_buckets; ++i) t.push_back(T * (i + 0.5) / n_buckets);
    }
    for (auto& x : t) x = std::max(dt, std::round(x / dt) * dt);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [&](double a, double b) { return std::abs(a - b) < 0.5 * dt; }),
            t.end());
    return t;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, std::span<const Instrument> book) {
    cfg.model.validate();
    cfg.mc.validate();
    if (book.empty()) throw DomainError("run_benchmark: empty instrument list");
    if (cfg.quote_moneyness.size() != 3) throw DomainError("run_benchmark: need exactly three quote strikes");

    BenchmarkReport rep;
    const RateMarket& mkt = cfg.model.market;
    const double t_max = max_expiry(book);
    const double dt = t_max / cfg.mc.n_steps;
    const auto tenors = required_tenors(book, mkt, cfg.approx.n_buckets, dt);

    // simulation book: instruments, their underlying vanillas, then the quote vanillas
    std::vector<Instrument> sim(book.begin(), book.end());
    std::vector<std::size_t> under_idx(book.size(), SIZE_MAX);
    for (std::size_t i = 0; i < book.size(); ++i)
        if (auto u = underlying_of(book[i]); u && std::holds_alternative<BarrierOption>(book[i])) {
            under_idx[i] = sim.size();
            sim.push_back(*u);
        }
    const std::size_t quote_begin = sim.size();
    for (double t : tenors) {
        const double f = mkt.forward(t);
        for (double m : cfg.quote_moneyness) {
            const double k = f * std::pow(m, std::sqrt(t / cfg.quote_ref_tenor));
            sim.push_back(Vanilla{k, t, k >= f ? OptionKind::Call : OptionKind::Put});
        }
    }

    auto t0 = Clock::now();
    const auto mc = price_book_mc(cfg.model, cfg.mc, sim, &rep.diagnostics);
    rep.mc_seconds = seconds_since(t0);

    std::vector<TenorQuotes> usable;
    for (std::size_t j = 0; j < tenors.size(); ++j) {
        TenorQuotes tq{tenors[j], {}};
        bool ok = true;
        for (std::size_t k = 0; k < 3; ++k) {
            const auto& v = std::get<Vanilla>(sim[quote_begin + 3 * j + k]);
            const auto sp = smile_point_from_price(mkt, v.strike, v.expiry, v.kind, mc[quote_begin + 3 * j + k]);
            if (sp.flagged) ok = false;
            tq.quotes.push_back({v.strike, sp.vol, v.expiry});
        }
        if (ok) {
            try {
                heston_calibrate(tq.quotes, cfg.model.heston.beta, mkt);
                usable.push_back(tq);
                continue;
            } catch (const CalibrationError& e) {
                rep.warnings.push_back("tenor " + std::to_string(tenors[j]) + " dropped: " + e.what());
            }
        } else {
            rep.warnings.push_back("tenor " + std::to_string(tenors[j]) + " dropped: quote outside arbitrage bounds");
        }
    }
    if (usable.empty()) throw CalibrationError("run_benchmark: no tenor could be calibrated", 0.0);
    rep.quotes = usable;

    std::vector<MarketVanilla> vanillas;
    for (std::size_t i = 0; i < book.size(); ++i)
        if (under_idx[i] != SIZE_MAX) vanillas.push_back({std::get<Vanilla>(sim[under_idx[i]]), mc[under_idx[i]].price});
    const VolMarket vm(mkt, usable, cfg.model.heston.beta, vanillas);
    const SvscMarks marks = cfg.marks.value_or(marks_from(cfg.model));

    t0 = Clock::now();
    rep.rows.resize(book.size());
    parallel_for(book.size(), cfg.mc.threads, [&](std::size_t i) {
        BenchmarkRow& row = rep.rows[i];
        row.instrument = book[i];
        row.model = mc[i];
        const double T = expiry_of(book[i]);
        try {
            row.approx = approx_price(vm, marks, cfg.approx, book[i], row.warnings);
            row.black_scholes = bs_price(mkt.with_vol(vm.atm_vol(T)), book[i]);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    rep.approx_seconds = seconds_since(t0);

    if (cfg.heston_mc) {
        // one Heston simulation per calibrated tenor, same seed
        std::map<const CalibrationReport*, std::vector<std::size_t>> by_tenor;
        for (std::size_t i = 0; i < book.size(); ++i) by_tenor[&vm.heston_at(expiry_of(book[i]))].push_back(i);
        for (const auto& [key, idx] : by_tenor) {
            SvscParams hp{key->params, 0.0, 0.0, 0.0, 0.0, mkt};
            hp.rho_bar = hp.heston.rho;
            std::vector<Instrument> sub;
            for (auto i : idx) sub.push_back(book[i]);
            McConfig hc = cfg.mc;
            hc.n_steps = std::max(1, static_cast<int>(std::lround(max_expiry(sub) / dt)));
            const auto hr = price_book_mc(hp, hc, sub);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                rep.rows[idx[k]].heston = hr[k].price;
                rep.rows[idx[k]].heston_stderr = hr[k].stderr_;
            }
        }
    }
    return rep;
}

}  // namespace svsc
