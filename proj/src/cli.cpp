#include "svsc/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "svsc/approx_engine.hpp"
#include "svsc/benchmark.hpp"
#include "svsc/bs_analytics.hpp"
#include "svsc/errors.hpp"
#include "svsc/estimation.hpp"
#include "svsc/heston.hpp"
#include "svsc/parallel.hpp"
#include "svsc/svsc_mc.hpp"

#ifndef SVSC_VERSION
#define SVSC_VERSION "0.0.0"
#endif

namespace svsc::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// config access

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : j.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T read(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": required");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T read_or(const json& j, const std::string& where, const char* key, T fallback) {
    return j.contains(key) ? read<T>(j, where, key) : fallback;
}

double positive(double x, const std::string& what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(what + ": must be positive");
    return x;
}

const json& block(const json& cfg, const char* key) {
    static const json empty = json::object();
    return cfg.contains(key) ? cfg.at(key) : empty;
}

template <class E>
E parse_enum(const std::string& s, const std::string& where, std::initializer_list<std::pair<const char*, E>> table) {
    for (const auto& [name, v] : table)
        if (s == name) return v;
    std::string names;
    for (const auto& [name, _] : table) names += std::string(names.empty() ? "" : "|") + name;
    throw ConfigError(where + ": '" + s + "' is not one of " + names);
}

// ---------------------------------------------------------------------------
// config blocks

struct Market {
    RateMarket rates;
    std::vector<TenorQuotes> quotes;
    std::optional<SvscParams> svsc;
};

Market parse_market(const json& cfg) {
    if (!cfg.contains("market")) throw ConfigError("market: required");
    const json& m = cfg.at("market");
    check_keys(m, "market", {"spot", "rate_dom", "rate_asset", "quotes", "svsc"});
    Market out;
    out.rates.spot = positive(read<double>(m, "market", "spot"), "market.spot");
    out.rates.rate_dom = read_or(m, "market", "rate_dom", 0.0);
    out.rates.rate_asset = read_or(m, "market", "rate_asset", 0.0);
    if (m.contains("quotes") == m.contains("svsc"))
        throw ConfigError("market: supply exactly one of 'quotes' and 'svsc'");

    if (m.contains("quotes")) {
        const json& q = m.at("quotes");
        if (!q.is_array() || q.empty()) throw ConfigError("market.quotes: expected a non-empty array");
        for (std::size_t i = 0; i < q.size(); ++i) {
            const std::string where = "market.quotes[" + std::to_string(i) + "]";
            check_keys(q[i], where, {"expiry", "strikes", "vols"});
            const double t = positive(read<double>(q[i], where, "expiry"), where + ".expiry");
            const auto ks = read<std::vector<double>>(q[i], where, "strikes");
            const auto vs = read<std::vector<double>>(q[i], where, "vols");
            if (ks.size() != vs.size() || ks.size() < 3)
                throw ConfigError(where + ": need at least three strikes with one vol each");
            TenorQuotes tq{t, {}};
            for (std::size_t k = 0; k < ks.size(); ++k)
                tq.quotes.push_back({positive(ks[k], where + ".strikes"), positive(vs[k], where + ".vols"), t});
            out.quotes.push_back(std::move(tq));
        }
    } else {
        const json& s = m.at("svsc");
        const std::string w = "market.svsc";
        check_keys(s, w, {"beta", "v_bar", "v0", "alpha", "rho_bar", "rho0", "gamma", "epsilon", "rho_cs"});
        SvscParams p;
        p.heston.beta = read<double>(s, w, "beta");
        p.heston.v_bar = read<double>(s, w, "v_bar");
        p.heston.v0 = read_or(s, w, "v0", p.heston.v_bar);
        p.heston.alpha = read<double>(s, w, "alpha");
        p.rho_bar = read<double>(s, w, "rho_bar");
        p.heston.rho = read_or(s, w, "rho0", p.rho_bar);
        p.gamma = read<double>(s, w, "gamma");
        p.epsilon = read<double>(s, w, "epsilon");
        p.rho_cs = read<double>(s, w, "rho_cs");
        p.market = out.rates;
        try {
            p.validate();
        } catch (const DomainError& e) {
            throw ConfigError(w + ": " + e.what());
        }
        out.svsc = p;
    }
    return out;
}

SvscMarks parse_marks(const json& cfg, const Market& m) {
    if (!cfg.contains("marks")) {
        if (m.svsc) return marks_from(*m.svsc);
        throw ConfigError("marks: required when the market is given as quotes");
    }
    const json& j = cfg.at("marks");
    check_keys(j, "marks", {"beta", "gamma", "xi"});
    SvscMarks mk;
    mk.beta = positive(read<double>(j, "marks", "beta"), "marks.beta");
    mk.gamma = positive(read<double>(j, "marks", "gamma"), "marks.gamma");
    mk.xi = read<double>(j, "marks", "xi");
    if (m.svsc && std::abs(mk.beta - m.svsc->heston.beta) > 1e-12)
        throw ConfigError("marks.beta: must equal market.svsc.beta (the Heston calibration fixes beta)");
    return mk;
}

struct Engine {
    McConfig mc;
    ApproxOptions approx;
    bool heston_mc = false;
    std::vector<double> quote_moneyness{0.9554, 1.0, 1.0438};
    double quote_ref_tenor = 0.5;
};

Engine parse_engine(const json& cfg) {
    const json& e = block(cfg, "engine");
    const std::string w = "engine";
    check_keys(e, w, {"paths", "steps", "seed", "antithetic", "bridge_correction", "threads", "buckets",
                      "dupire_point", "rho_anchor", "heston_mc", "quote_moneyness", "quote_ref_tenor"});
    Engine out;
    out.mc.n_paths = read_or<std::int64_t>(e, w, "paths", 100000);
    out.mc.n_steps = read_or(e, w, "steps", 500);
    out.mc.seed = read_or<std::uint64_t>(e, w, "seed", 42);
    out.mc.antithetic = read_or(e, w, "antithetic", true);
    out.mc.bridge_correction = read_or(e, w, "bridge_correction", true);
    out.mc.threads = resolve_threads(read_or(e, w, "threads", 1));
    try {
        out.mc.validate();
    } catch (const DomainError& ex) {
        throw ConfigError(w + ": " + ex.what());
    }
    out.approx.n_buckets = read_or(e, w, "buckets", 10);
    if (out.approx.n_buckets < 1) throw ConfigError("engine.buckets: must be at least 1");
    out.approx.dupire_point = parse_enum<DupirePoint>(read_or<std::string>(e, w, "dupire_point", "barrier"),
                                                      "engine.dupire_point",
                                                      {{"barrier", DupirePoint::Barrier}, {"atm", DupirePoint::AtTheMoney}});
    out.approx.rho_anchor = parse_enum<UnwindRhoAnchor>(
        read_or<std::string>(e, w, "rho_anchor", "rho_h"), "engine.rho_anchor",
        {{"rho_h", UnwindRhoAnchor::RhoH}, {"conditional", UnwindRhoAnchor::ConditionalOnly}});
    out.heston_mc = read_or(e, w, "heston_mc", false);
    out.quote_moneyness = read_or(e, w, "quote_moneyness", out.quote_moneyness);
    if (out.quote_moneyness.size() != 3) throw ConfigError("engine.quote_moneyness: need three values");
    out.quote_ref_tenor = positive(read_or(e, w, "quote_ref_tenor", 0.5), "engine.quote_ref_tenor");
    return out;
}

BarrierDirection direction_or_infer(const json& j, const std::string& w, double barrier, double spot) {
    if (j.contains("direction"))
        return parse_enum<BarrierDirection>(read<std::string>(j, w, "direction"), w + ".direction",
                                            {{"up", BarrierDirection::Up}, {"down", BarrierDirection::Down}});
    if (barrier == spot) throw ConfigError(w + ": barrier equals spot; give 'direction'");
    return barrier < spot ? BarrierDirection::Down : BarrierDirection::Up;
}

OptionKind parse_kind(const json& j, const std::string& w) {
    return parse_enum<OptionKind>(read<std::string>(j, w, "kind"), w + ".kind",
                                  {{"call", OptionKind::Call}, {"put", OptionKind::Put}});
}

Instrument parse_instrument(const json& j, const std::string& w, double spot) {
    const auto type = read<std::string>(j, w, "type");
    if (type == "vanilla") {
        check_keys(j, w, {"type", "kind", "strike", "expiry"});
        return Vanilla{positive(read<double>(j, w, "strike"), w + ".strike"),
                       positive(read<double>(j, w, "expiry"), w + ".expiry"), parse_kind(j, w)};
    }
    if (type == "digital") {
        check_keys(j, w, {"type", "kind", "strike", "expiry"});
        return EuropeanDigital{positive(read<double>(j, w, "strike"), w + ".strike"),
                               positive(read<double>(j, w, "expiry"), w + ".expiry"),
                               parse_enum<DigitalKind>(read<std::string>(j, w, "kind"), w + ".kind",
                                                       {{"above", DigitalKind::Above}, {"below", DigitalKind::Below}})};
    }
    if (type == "one_touch") {
        check_keys(j, w, {"type", "barrier", "expiry", "direction"});
        const double b = positive(read<double>(j, w, "barrier"), w + ".barrier");
        return OneTouch{b, positive(read<double>(j, w, "expiry"), w + ".expiry"), direction_or_infer(j, w, b, spot)};
    }
    if (type == "barrier") {
        check_keys(j, w, {"type", "kind", "strike", "barrier", "expiry", "direction", "style"});
        const double b = positive(read<double>(j, w, "barrier"), w + ".barrier");
        BarrierOption o;
        o.underlying = Vanilla{positive(read<double>(j, w, "strike"), w + ".strike"),
                               positive(read<double>(j, w, "expiry"), w + ".expiry"), parse_kind(j, w)};
        o.barrier = b;
        o.direction = direction_or_infer(j, w, b, spot);
        o.style = parse_enum<BarrierStyle>(read_or<std::string>(j, w, "style", "knock_out"), w + ".style",
                                           {{"knock_out", BarrierStyle::KnockOut}, {"knock_in", BarrierStyle::KnockIn}});
        return o;
    }
    throw ConfigError(w + ".type: '" + type + "' is not one of vanilla|digital|one_touch|barrier");
}

std::vector<Instrument> parse_instruments(const json& cfg, double spot) {
    if (!cfg.contains("instruments") || !cfg.at("instruments").is_array() || cfg.at("instruments").empty())
        throw ConfigError("instruments: a non-empty list is required for this command");
    std::vector<Instrument> out;
    const json& arr = cfg.at("instruments");
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(parse_instrument(arr[i], "instruments[" + std::to_string(i) + "]", spot));
    return out;
}

struct Output {
    std::string format = "csv";
    bool bp = false;
    double scale() const { return bp ? 1e4 : 1.0; }
};

Output parse_output(const json& cfg) {
    const json& o = block(cfg, "output");
    check_keys(o, "output", {"format", "bp"});
    Output out;
    out.format = read_or<std::string>(o, "output", "format", "csv");
    if (out.format != "csv" && out.format != "json") throw ConfigError("output.format: must be csv or json");
    out.bp = read_or(o, "output", "bp", false);
    return out;
}

void check_top_level(const json& cfg) {
    check_keys(cfg, "config", {"description", "market", "marks", "engine", "instruments", "smile", "vega_profile",
                               "estimate", "output"});
}

// ---------------------------------------------------------------------------
// table helpers

Cell num(double x) { return std::isfinite(x) ? Cell{x} : Cell{}; }

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : sep) + x;
    return s;
}

const std::vector<std::string> kInstrumentColumns{"instrument", "type", "kind", "direction", "style",
                                                  "strike", "barrier", "expiry"};

std::vector<Cell> instrument_cells(const Instrument& inst) {
    return std::visit(
        [&](const auto& x) -> std::vector<Cell> {
            using T = std::decay_t<decltype(x)>;
            const Cell none{};
            if constexpr (std::is_same_v<T, Vanilla>)
                return {describe(inst), "vanilla", to_string(x.kind), none, none, x.strike, none, x.expiry};
            else if constexpr (std::is_same_v<T, EuropeanDigital>)
                return {describe(inst), "digital", to_string(x.kind), none, none, x.strike, none, x.expiry};
            else if constexpr (std::is_same_v<T, OneTouch>)
                return {describe(inst), "one_touch", none, to_string(x.direction), none, none, x.barrier, x.expiry};
            else
                return {describe(inst), "barrier", to_string(x.underlying.kind), to_string(x.direction),
                        to_string(x.style), x.underlying.strike, x.barrier, x.underlying.expiry};
        },
        inst);
}

json calibration_json(const CalibrationReport& c, double expiry) {
    return {{"expiry", expiry},          {"v_bar", c.params.v_bar}, {"v0", c.params.v0},
            {"alpha", c.params.alpha},   {"rho", c.params.rho},     {"beta", c.params.beta},
            {"max_abs_residual", c.max_abs_residual}};
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

// ---------------------------------------------------------------------------
// commands

Report cmd_calibrate(const json& cfg) {
    const Market m = parse_market(cfg);
    if (m.svsc) throw ConfigError("calibrate: needs market.quotes");
    double beta = 2.0;
    if (cfg.contains("marks")) beta = parse_marks(cfg, m).beta;
    Report r;
    r.table.columns = {"expiry", "strike", "quote_vol", "heston_vol", "residual",
                       "v_bar", "alpha", "rho", "max_abs_residual", "error"};
    json tenors = json::array();
    for (const auto& tq : m.quotes) {
        const auto t0 = Clock::now();
        try {
            const auto c = heston_calibrate(tq.quotes, beta, m.rates);
            r.log.push_back("calibrated T=" + std::to_string(tq.expiry) + " in " + std::to_string(seconds_since(t0)) +
                            " s, " + std::to_string(c.function_evaluations) + " evaluations");
            tenors.push_back(calibration_json(c, tq.expiry));
            for (std::size_t k = 0; k < tq.quotes.size(); ++k) {
                const auto& q = tq.quotes[k];
                r.table.rows.push_back({tq.expiry, q.strike, q.vol, q.vol + c.vol_residuals[k], c.vol_residuals[k],
                                        c.params.v_bar, c.params.alpha, c.params.rho, c.max_abs_residual, Cell{}});
            }
        } catch (const CalibrationError& e) {
            r.exit_code = kExitPartial;
            tenors.push_back({{"expiry", tq.expiry}, {"error", e.what()}, {"best_residual", e.best_residual()}});
            for (const auto& q : tq.quotes)
                r.table.rows.push_back({tq.expiry, q.strike, q.vol, Cell{}, Cell{}, Cell{}, Cell{}, Cell{},
                                        e.best_residual(), std::string(e.what())});
        }
    }
    r.summary["beta"] = beta;
    r.summary["tenors"] = tenors;
    return r;
}

std::vector<std::string> price_columns() {
    auto c = kInstrumentColumns;
    for (const char* x : {"model", "model_stderr", "approx", "approx_diff", "heston", "heston_stderr",
                          "black_scholes", "warnings", "error"})
        c.push_back(x);
    return c;
}

Report price_with_model(const json& cfg, const Market& m, const std::vector<Instrument>& book) {
    const Engine e = parse_engine(cfg);
    const Output out = parse_output(cfg);
    BenchmarkConfig bc;
    bc.model = *m.svsc;
    bc.mc = e.mc;
    bc.approx = e.approx;
    bc.heston_mc = e.heston_mc;
    bc.quote_moneyness = e.quote_moneyness;
    bc.quote_ref_tenor = e.quote_ref_tenor;
    // marks other than the model's own give a sensitivity run; the model still drives the simulation
    if (cfg.contains("marks")) bc.marks = parse_marks(cfg, m);
    const auto rep = run_benchmark(bc, book);

    Report r;
    r.table.columns = price_columns();
    const double s = out.scale();
    for (const auto& row : rep.rows) {
        auto cells = instrument_cells(row.instrument);
        for (Cell c : {num(s * row.model.price), num(s * row.model.stderr_), num(s * row.approx),
                       num(s * row.approx_diff()), num(s * row.heston), num(s * row.heston_stderr),
                       num(s * row.black_scholes), Cell{join(row.warnings, "; ")}, Cell{row.error}})
            cells.push_back(c);
        r.table.rows.push_back(std::move(cells));
        if (!row.error.empty()) r.exit_code = kExitPartial;
    }
    json cal = json::array();
    for (const auto& tq : rep.quotes) {
        json c = calibration_json(heston_calibrate(tq.quotes, bc.model.heston.beta, m.rates), tq.expiry);
        json q = json::array();
        for (const auto& v : tq.quotes) q.push_back({{"strike", v.strike}, {"vol", v.vol}});
        c["quotes"] = q;
        cal.push_back(c);
    }
    r.summary["calibration"] = cal;
    r.summary["units"] = out.bp ? "bp" : "price";
    r.summary["rho_clamp_rate"] = rep.diagnostics.clamp_rate();
    for (const auto& w : rep.warnings) r.log.push_back("warning: " + w);
    r.log.push_back("simulation " + std::to_string(rep.mc_seconds) + " s, approximation " +
                    std::to_string(rep.approx_seconds) + " s");
    return r;
}

Report price_from_quotes(const json& cfg, const Market& m, const std::vector<Instrument>& book) {
    const Engine e = parse_engine(cfg);
    const Output out = parse_output(cfg);
    const SvscMarks marks = parse_marks(cfg, m);
    const auto t0 = Clock::now();
    std::optional<VolMarket> vm;
    try {
        vm.emplace(m.rates, m.quotes, marks.beta);
    } catch (const CalibrationError& ex) {
        Report r;
        r.exit_code = kExitPartial;
        r.summary["error"] = ex.what();
        r.summary["best_residual"] = ex.best_residual();
        r.log.push_back(std::string("calibration failed: ") + ex.what());
        return r;
    }

    struct Row {
        double approx = kNaN, heston = kNaN, heston_se = kNaN, bs = kNaN;
        std::vector<std::string> warnings;
        std::string error;
    };
    std::vector<Row> rows(book.size());
    parallel_for(book.size(), e.mc.threads, [&](std::size_t i) {
        Row& row = rows[i];
        const double T = expiry_of(book[i]);
        try {
            const HestonParams hp = vm->heston_at(T).params;
            row.bs = bs_price(m.rates.with_vol(vm->atm_vol(T)), book[i]);
            std::visit(
                [&](const auto& x) {
                    using T_ = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T_, Vanilla>) {
                        row.approx = vm->vanilla_price(x);
                        row.heston = heston_vanilla_price(hp, m.rates, x);
                    } else if constexpr (std::is_same_v<T_, EuropeanDigital>) {
                        row.approx = row.heston = heston_digital_price(hp, m.rates, x);
                    } else {
                        ApproxResult a;
                        if constexpr (std::is_same_v<T_, OneTouch>) a = price_one_touch(*vm, marks, x, e.approx);
                        else a = price_barrier(*vm, marks, x, e.approx);
                        row.approx = a.result.price;
                        row.warnings = a.diagnostics.warnings;
                    }
                },
                book[i]);
        } catch (const std::exception& ex) {
            row.error = ex.what();
        }
    });
    const double approx_s = seconds_since(t0);

    if (e.heston_mc) {
        // exotic Heston column by simulation, one run per calibrated tenor
        std::map<const CalibrationReport*, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < book.size(); ++i)
            if (std::holds_alternative<OneTouch>(book[i]) || std::holds_alternative<BarrierOption>(book[i]))
                groups[&vm->heston_at(expiry_of(book[i]))].push_back(i);
        for (const auto& [cal, idx] : groups) {
            SvscParams hp{cal->params, 0.0, cal->params.rho, 0.0, 0.0, m.rates};
            std::vector<Instrument> sub;
            for (auto i : idx) sub.push_back(book[i]);
            const auto res = price_book_mc(hp, e.mc, sub);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                rows[idx[k]].heston = res[k].price;
                rows[idx[k]].heston_se = res[k].stderr_;
            }
        }
    }

    Report r;
    r.table.columns = price_columns();
    const double s = out.scale();
    for (std::size_t i = 0; i < book.size(); ++i) {
        const Row& row = rows[i];
        auto cells = instrument_cells(book[i]);
        for (Cell c : {Cell{}, Cell{}, num(s * row.approx), Cell{}, num(s * row.heston), num(s * row.heston_se),
                       num(s * row.bs), Cell{join(row.warnings, "; ")}, Cell{row.error}})
            cells.push_back(c);
        r.table.rows.push_back(std::move(cells));
        if (!row.error.empty()) r.exit_code = kExitPartial;
    }
    json cal = json::array();
    for (const auto& tq : vm->tenors()) cal.push_back(calibration_json(vm->heston_at(tq.expiry), tq.expiry));
    r.summary["calibration"] = cal;
    r.summary["units"] = out.bp ? "bp" : "price";
    r.log.push_back("approximation " + std::to_string(approx_s) + " s");
    return r;
}

Report cmd_price(const json& cfg) {
    const Market m = parse_market(cfg);
    const auto book = parse_instruments(cfg, m.rates.spot);
    return m.svsc ? price_with_model(cfg, m, book) : price_from_quotes(cfg, m, book);
}

Report cmd_mc_benchmark(const json& cfg) {
    const Market m = parse_market(cfg);
    if (!m.svsc) throw ConfigError("mc-benchmark: needs market.svsc");
    const auto book = parse_instruments(cfg, m.rates.spot);
    const Engine e = parse_engine(cfg);
    const Output out = parse_output(cfg);
    McDiagnostics diag;
    const auto t0 = Clock::now();
    const auto res = price_book_mc(*m.svsc, e.mc, book, &diag);
    const double secs = seconds_since(t0);

    Report r;
    r.table.columns = kInstrumentColumns;
    for (const char* c : {"price", "stderr", "paths", "steps"}) r.table.columns.push_back(c);
    const double s = out.scale();
    for (std::size_t i = 0; i < book.size(); ++i) {
        auto cells = instrument_cells(book[i]);
        cells.push_back(num(s * res[i].price));
        cells.push_back(num(s * res[i].stderr_));
        cells.push_back(static_cast<long long>(res[i].n_paths));
        cells.push_back(static_cast<long long>(res[i].n_steps));
        r.table.rows.push_back(std::move(cells));
    }
    r.summary["units"] = out.bp ? "bp" : "price";
    r.summary["rho_clamp_rate"] = diag.clamp_rate();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%lld paths x %d steps in %.2f s (%.0f paths/s, %d threads), rho clamp rate %.3g",
                  static_cast<long long>(e.mc.n_paths), e.mc.n_steps, secs, static_cast<double>(e.mc.n_paths) / secs,
                  e.mc.threads, diag.clamp_rate());
    r.log.emplace_back(buf);
    return r;
}

std::vector<double> grid(const json& j, const std::string& w, const char* list, const char* lo, const char* hi,
                         const char* n) {
    if (j.contains(list)) {
        auto v = read<std::vector<double>>(j, w, list);
        if (v.empty()) throw ConfigError(w + "." + list + ": empty");
        return v;
    }
    const double a = read<double>(j, w, lo), b = read<double>(j, w, hi);
    const int k = read<int>(j, w, n);
    if (k < 1 || !(b >= a)) throw ConfigError(w + ": bad grid");
    std::vector<double> v;
    for (int i = 0; i < k; ++i) v.push_back(k == 1 ? a : a + (b - a) * i / (k - 1));
    return v;
}

Report cmd_smile(const json& cfg) {
    const Market m = parse_market(cfg);
    if (!cfg.contains("smile")) throw ConfigError("smile: block required");
    const json& sj = cfg.at("smile");
    check_keys(sj, "smile", {"expiry", "strikes", "strike_min", "strike_max", "points"});
    const double T = positive(read<double>(sj, "smile", "expiry"), "smile.expiry");
    const auto strikes = grid(sj, "smile", "strikes", "strike_min", "strike_max", "points");
    for (double k : strikes) positive(k, "smile.strikes");

    Report r;
    if (m.svsc) {
        const Engine e = parse_engine(cfg);
        const auto t0 = Clock::now();
        const auto pts = svsc_smile(*m.svsc, e.mc, strikes, T);
        r.log.push_back("simulation " + std::to_string(seconds_since(t0)) + " s");
        r.table.columns = {"strike", "svsc_vol", "svsc_vol_stderr", "heston_vol", "flagged"};
        // Heston line: the same parameters with no correlation volatility
        for (const auto& p : pts)
            r.table.rows.push_back({p.strike, num(p.vol), num(p.vol_stderr),
                                    num(heston_implied_vol(m.svsc->heston, m.rates, p.strike, T)),
                                    static_cast<long long>(p.flagged)});
        bool any = false;
        for (const auto& p : pts) any |= p.flagged;
        if (any) r.exit_code = kExitPartial;
    } else {
        double beta = cfg.contains("marks") ? parse_marks(cfg, m).beta : 2.0;
        const VolMarket vm(m.rates, m.quotes, beta);
        r.table.columns = {"strike", "heston_vol"};
        const auto& cal = vm.heston_at(T);
        for (double k : strikes) r.table.rows.push_back({k, num(heston_implied_vol(cal.params, m.rates, k, T))});
        r.summary["calibration"] = calibration_json(cal, T);
    }
    r.summary["expiry"] = T;
    return r;
}

Report cmd_vega_profile(const json& cfg) {
    const Output out = parse_output(cfg);
    if (!cfg.contains("vega_profile")) throw ConfigError("vega_profile: block required");
    const json& j = cfg.at("vega_profile");
    const std::string w = "vega_profile";
    check_keys(j, w, {"spot", "rate_dom", "rate_asset", "vol", "kind", "strike", "barrier", "direction", "expiry",
                      "times_to_expiry", "spots", "spot_min", "spot_max", "points"});
    BsMarket mkt;
    mkt.spot = positive(read_or(j, w, "spot", 1.0), w + ".spot");
    mkt.rate_dom = read_or(j, w, "rate_dom", 0.0);
    mkt.rate_asset = read_or(j, w, "rate_asset", 0.0);
    mkt.vol = positive(read<double>(j, w, "vol"), w + ".vol");
    const Vanilla u{positive(read<double>(j, w, "strike"), w + ".strike"),
                    positive(read<double>(j, w, "expiry"), w + ".expiry"), parse_kind(j, w)};
    const double b = positive(read<double>(j, w, "barrier"), w + ".barrier");
    const BarrierDirection dir = direction_or_infer(j, w, b, mkt.spot);
    const BarrierOption opt{u, b, BarrierStyle::KnockOut, dir};
    if (!is_otm_barrier(opt)) throw ConfigError(w + ": the vanilla replication hedges out-of-the-money barriers only");
    const auto taus = read_or(j, w, "times_to_expiry", std::vector<double>{u.expiry, 0.5 * u.expiry});
    const auto spots = grid(j, w, "spots", "spot_min", "spot_max", "points");

    // replication fixed at inception, then held while spot and time move
    const ReplicationPortfolio rp = barrier_replication(mkt, u, b);

    Report r;
    r.table.columns = {"time_to_expiry", "spot", "barrier_vega", "replication_vega", "hedged_vega"};
    const double s = out.scale();
    json per_tau = json::array();
    for (double tau : taus) {
        positive(tau, w + ".times_to_expiry");
        double max_pre = 0.0, max_post = 0.0;
        for (double x : spots) {
            if (is_breached(x, b, dir)) continue;
            BsMarket at = mkt;
            at.spot = x;
            BarrierOption live = opt;
            live.underlying.expiry = tau;
            const double h = 1e-4;
            BsMarket up = at, dn = at;
            up.vol += h;
            dn.vol -= h;
            const double vb = (bs_barrier_price(up, live) - bs_barrier_price(dn, live)) / (2.0 * h);
            double vr = 0.0;
            for (const auto& leg : rp.legs) {
                Vanilla v = std::get<Vanilla>(leg.instrument);
                v.expiry = tau;
                vr += leg.quantity * bs_vega(at, v);
            }
            max_pre = std::max(max_pre, std::abs(vb));
            max_post = std::max(max_post, std::abs(vb - vr));
            r.table.rows.push_back({tau, x, s * vb, s * vr, s * (vb - vr)});
        }
        per_tau.push_back({{"time_to_expiry", tau}, {"max_abs_barrier_vega", s * max_pre},
                           {"max_abs_hedged_vega", s * max_post}});
    }
    r.summary["reflected_strike"] = rp.reflected_strike;
    r.summary["reflected_quantity"] = rp.legs[1].quantity;
    r.summary["profiles"] = per_tau;
    return r;
}

Report cmd_estimate(const json& cfg, const std::filesystem::path& base_dir) {
    if (!cfg.contains("estimate")) throw ConfigError("estimate: block required");
    const json& j = cfg.at("estimate");
    const std::string w = "estimate";
    check_keys(j, w, {"csv", "synthetic", "short_tenor", "long_tenor", "xi_tenor", "window", "rho_bar",
                      "calibration_alpha"});
    EstimationOptions o;
    o.short_tenor = read_or(j, w, "short_tenor", o.short_tenor);
    o.long_tenor = read_or(j, w, "long_tenor", o.long_tenor);
    o.xi_tenor = read_or(j, w, "xi_tenor", o.xi_tenor);
    o.window = read_or<std::size_t>(j, w, "window", o.window);
    if (j.contains("rho_bar")) o.rho_bar = read<double>(j, w, "rho_bar");
    o.calibration_alpha = read_or(j, w, "calibration_alpha", o.calibration_alpha);
    try {
        for (const auto& t : {o.short_tenor, o.long_tenor, o.xi_tenor}) parse_tenor(t);
    } catch (const EstimationError& e) {
        throw ConfigError(w + ": " + e.what());
    }
    if (j.contains("csv") == j.contains("synthetic")) throw ConfigError(w + ": supply exactly one of 'csv' and 'synthetic'");

    MarketSeries series;
    if (j.contains("csv")) {
        std::filesystem::path p = read<std::string>(j, w, "csv");
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) throw ConfigError(w + ".csv: cannot open " + p.string());
        try {
            series = parse_market_csv(in);
        } catch (const EstimationError& e) {
            throw ConfigError(p.filename().string() + ": " + e.what());
        }
    } else {
        const json& sj = j.at("synthetic");
        const std::string sw = w + ".synthetic";
        check_keys(sj, sw, {"beta", "gamma", "xi", "v_bar", "v0", "alpha", "rho_bar", "rho0", "epsilon", "rr_scale",
                            "vol_noise", "rr_noise", "days", "substeps", "tenors"});
        SyntheticSpec sp;
        sp.beta = read_or(sj, sw, "beta", sp.beta);
        sp.gamma = read_or(sj, sw, "gamma", sp.gamma);
        sp.xi = read_or(sj, sw, "xi", sp.xi);
        sp.v_bar = read_or(sj, sw, "v_bar", sp.v_bar);
        sp.v0 = read_or(sj, sw, "v0", sp.v_bar);
        sp.alpha = read_or(sj, sw, "alpha", sp.alpha);
        sp.rho_bar = read_or(sj, sw, "rho_bar", sp.rho_bar);
        sp.rho0 = read_or(sj, sw, "rho0", sp.rho_bar);
        sp.epsilon = read_or(sj, sw, "epsilon", sp.epsilon);
        sp.rr_scale = read_or(sj, sw, "rr_scale", sp.rr_scale);
        sp.vol_noise = read_or(sj, sw, "vol_noise", sp.vol_noise);
        sp.rr_noise = read_or(sj, sw, "rr_noise", sp.rr_noise);
        sp.n_days = read_or<std::size_t>(sj, sw, "days", sp.n_days);
        sp.substeps = read_or(sj, sw, "substeps", sp.substeps);
        sp.tenors = read_or(sj, sw, "tenors", sp.tenors);
        sp.seed = parse_engine(cfg).mc.seed;
        try {
            series = synthetic_market_series(sp);
        } catch (const DomainError& e) {
            throw ConfigError(sw + ": " + e.what());
        }
    }

    const auto rep = run_estimation(series, o);
    Report r;
    r.table.columns = {"date", "rr_beta", "rr_beta_stderr", "rr", "rho_bar", "xi"};
    for (const auto& x : rep.xi_series)
        r.table.rows.push_back({x.date, x.rr_beta, x.rr_beta_stderr, x.rr, x.rho_bar, num(x.xi)});
    auto reg = [](const RegressionResult& g) {
        return json{{"slope", g.slope}, {"intercept", g.intercept}, {"r_squared", g.r_squared},
                    {"slope_stderr", g.slope_stderr}, {"n_obs", g.n_obs}};
    };
    r.summary = {{"beta", rep.beta},
                 {"gamma", rep.gamma},
                 {"xi", rep.xi},
                 {"xi_mean", rep.xi_mean},
                 {"xi_dates", rep.xi_series.size()},
                 {"beta_regression", reg(rep.beta_regression)},
                 {"gamma_regression", reg(rep.gamma_regression)},
                 {"rows", series.size()},
                 {"skipped_dates", rep.warnings.size()}};
    for (const auto& wmsg : rep.warnings) r.log.push_back("warning: " + wmsg);
    return r;
}

// ---------------------------------------------------------------------------
// rendering

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string csv_cell(const Cell& c) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) return "";
            else if constexpr (std::is_same_v<T, double>) return fmt(x);
            else if constexpr (std::is_same_v<T, long long>) return std::to_string(x);
            else {
                if (x.find_first_of(",\"\n") == std::string::npos) return x;
                std::string q = "\"";
                for (char ch : x) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                return q + "\"";
            }
        },
        c);
}

nlohmann::ordered_json header_json(const Report& r) {
    nlohmann::ordered_json h;
    h["version"] = version();
    h["command"] = r.command;
    h["config_hash"] = r.config_hash;
    h["seed"] = r.seed;
    return h;
}

}  // namespace

const char* version() { return SVSC_VERSION; }

json load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_overrides(json& cfg, const Overrides& o) {
    if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
    if (o.seed) cfg["engine"]["seed"] = *o.seed;
    if (o.paths) cfg["engine"]["paths"] = *o.paths;
    if (o.steps) cfg["engine"]["steps"] = *o.steps;
    if (o.buckets) cfg["engine"]["buckets"] = *o.buckets;
    if (o.format) cfg["output"]["format"] = *o.format;
    if (o.bp) cfg["output"]["bp"] = true;
}

std::string config_hash(const json& cfg) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : cfg.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Report run_command(const std::string& command, const json& cfg, const std::filesystem::path& base_dir) {
    check_top_level(cfg);
    const Output out = parse_output(cfg);
    Report r;
    if (command == "calibrate") r = cmd_calibrate(cfg);
    else if (command == "price") r = cmd_price(cfg);
    else if (command == "mc-benchmark") r = cmd_mc_benchmark(cfg);
    else if (command == "smile") r = cmd_smile(cfg);
    else if (command == "vega-profile") r = cmd_vega_profile(cfg);
    else if (command == "estimate") r = cmd_estimate(cfg, base_dir);
    else throw ConfigError("unknown command '" + command + "'");
    r.command = command;
    r.config_hash = config_hash(cfg);
    r.seed = parse_engine(cfg).mc.seed;
    r.format = out.format;
    return r;
}

std::string render_csv(const Report& r) {
    std::ostringstream os;
    os << "# svsc " << version() << '\n'
       << "# command: " << r.command << '\n'
       << "# config_hash: " << r.config_hash << '\n'
       << "# seed: " << r.seed << '\n';
    for (const auto& [k, v] : r.summary.items()) os << "# " << k << ": " << v.dump() << '\n';
    for (std::size_t i = 0; i < r.table.columns.size(); ++i) os << (i ? "," : "") << r.table.columns[i];
    os << '\n';
    for (const auto& row : r.table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
        os << '\n';
    }
    return os.str();
}

std::string render_json(const Report& r) {
    nlohmann::ordered_json doc;
    doc["header"] = header_json(r);
    doc["summary"] = r.summary;
    doc["columns"] = r.table.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : r.table.rows) {
        nlohmann::ordered_json o;
        for (std::size_t i = 0; i < row.size(); ++i)
            std::visit(
                [&](const auto& x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, std::monostate>) o[r.table.columns[i]] = nullptr;
                    else o[r.table.columns[i]] = x;
                },
                row[i]);
        rows.push_back(std::move(o));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string render_summary_json(const Report& r) {
    nlohmann::ordered_json doc;
    doc["header"] = header_json(r);
    doc["summary"] = r.summary;
    return doc.dump(2) + "\n";
}

}  // namespace svsc::cli
