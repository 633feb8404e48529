#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "svsc/cli.hpp"

using namespace svsc::cli;
namespace fs = std::filesystem;

namespace {

json quotes_config() {
    return json::parse(R"({
      "market": {"spot": 1.0, "quotes": [{"expiry": 0.5, "strikes": [0.9554, 1.0, 1.0438], "vols": [0.101, 0.09, 0.086]}]},
      "marks": {"beta": 2.0, "gamma": 4.0, "xi": 7.0},
      "instruments": [
        {"type": "barrier", "kind": "call", "strike": 1.0, "barrier": 0.95, "expiry": 0.5},
        {"type": "one_touch", "barrier": 1.05, "expiry": 0.5},
        {"type": "vanilla", "kind": "put", "strike": 0.98, "expiry": 0.5}
      ]
    })");
}

json model_config() {
    return json::parse(R"({
      "market": {"spot": 1.0, "svsc": {"beta": 2.0, "v_bar": 0.009924, "alpha": 0.2536, "rho_bar": -0.3835,
                                      "gamma": 4.0, "epsilon": 10.0, "rho_cs": 0.7}},
      "engine": {"paths": 4000, "steps": 50, "seed": 9},
      "instruments": [
        {"type": "barrier", "kind": "call", "strike": 1.0, "barrier": 0.95, "expiry": 0.5},
        {"type": "digital", "kind": "above", "strike": 1.0, "expiry": 0.5}
      ]
    })");
}

fs::path temp_dir() {
    fs::path d = fs::temp_directory_path() / ("svsc_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
}

int run_binary(const std::string& args) {
    const int rc = std::system((std::string(SVSC_CLI_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(CliConfig, MarketNeedsExactlyOneSource) {
    json c = quotes_config();
    c["market"]["svsc"] = model_config()["market"]["svsc"];
    EXPECT_THROW(run_command("price", c), ConfigError);
    c["market"].erase("svsc");
    c["market"].erase("quotes");
    EXPECT_THROW(run_command("price", c), ConfigError);
}

TEST(CliConfig, UnknownKeysAreRejected) {
    json c = quotes_config();
    c["engine"]["pathz"] = 10;
    EXPECT_THROW(run_command("price", c), ConfigError);
}

TEST(CliConfig, EmptyInstrumentListIsAUsageError) {
    json c = quotes_config();
    c["instruments"] = json::array();
    EXPECT_THROW(run_command("price", c), ConfigError);
}

TEST(CliConfig, BadEnumNamesTheChoices) {
    json c = quotes_config();
    c["instruments"][0]["kind"] = "straddle";
    try {
        run_command("price", c);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("call|put"), std::string::npos);
    }
}

TEST(CliConfig, OverridesMirrorJsonPaths) {
    json c = quotes_config();
    Overrides o;
    o.seed = 77;
    o.paths = 1234;
    o.buckets = 5;
    o.bp = true;
    apply_overrides(c, o);
    EXPECT_EQ(c["engine"]["seed"], 77);
    EXPECT_EQ(c["engine"]["paths"], 1234);
    EXPECT_EQ(c["engine"]["buckets"], 5);
    EXPECT_EQ(c["output"]["bp"], true);
}

TEST(CliHash, DependsOnContentNotKeyOrder) {
    const json a = json::parse(R"({"a": 1, "b": [1, 2]})");
    const json b = json::parse(R"({"b": [1, 2], "a": 1})");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"a": 2, "b": [1, 2]})")));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(CliCalibrate, FlatQuotesGiveNoVolOfVol) {
    json c = quotes_config();
    c["market"]["quotes"][0]["vols"] = {0.09, 0.09, 0.09};
    const auto r = run_command("calibrate", c);
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_LT(r.summary["tenors"][0]["alpha"].get<double>(), 1e-3);
}

TEST(CliCalibrate, FailureReportsResidualAndExitsNonzero) {
    json c = quotes_config();
    c["market"]["quotes"][0]["vols"] = {0.30, 0.05, 0.30};
    const auto r = run_command("calibrate", c);
    EXPECT_EQ(r.exit_code, kExitPartial);
    EXPECT_TRUE(r.summary["tenors"][0].contains("best_residual"));
}

TEST(CliPrice, QuotesModeFillsApproxAndBlackScholes) {
    const auto r = run_command("price", quotes_config());
    EXPECT_EQ(r.exit_code, kExitOk);
    ASSERT_EQ(r.table.rows.size(), 3u);
    const auto col = [&](const char* name) {
        return std::find(r.table.columns.begin(), r.table.columns.end(), name) - r.table.columns.begin();
    };
    for (const auto& row : r.table.rows) {
        EXPECT_TRUE(std::holds_alternative<double>(row[col("approx")]));
        EXPECT_TRUE(std::holds_alternative<double>(row[col("black_scholes")]));
        EXPECT_TRUE(std::holds_alternative<std::monostate>(row[col("model")]));
    }
}

TEST(CliPrice, BasisPointsScaleByTenThousand) {
    json c = quotes_config();
    const auto plain = run_command("price", c);
    c["output"]["bp"] = true;
    const auto bp = run_command("price", c);
    const auto i = std::find(plain.table.columns.begin(), plain.table.columns.end(), "approx") - plain.table.columns.begin();
    EXPECT_NEAR(std::get<double>(bp.table.rows[0][i]), 1e4 * std::get<double>(plain.table.rows[0][i]), 1e-9);
}

TEST(CliPrice, ModelModeIsByteIdenticalForSameSeed) {
    const json c = model_config();
    const auto a = render_csv(run_command("price", c));
    const auto b = render_csv(run_command("price", c));
    EXPECT_EQ(a, b);
    json c2 = c;
    c2["engine"]["seed"] = 10;
    EXPECT_NE(render_csv(run_command("price", c2)), a);
}

TEST(CliOutput, HeaderEchoesHashSeedAndVersion) {
    const json c = model_config();
    const auto r = run_command("mc-benchmark", c);
    const auto csv = render_csv(r);
    EXPECT_NE(csv.find(std::string("# svsc ") + version()), std::string::npos);
    EXPECT_NE(csv.find("# config_hash: " + config_hash(c)), std::string::npos);
    EXPECT_NE(csv.find("# seed: 9"), std::string::npos);
    const json j = json::parse(render_json(r));
    EXPECT_EQ(j["header"]["config_hash"], config_hash(c));
    EXPECT_EQ(j["header"]["seed"], 9);
    EXPECT_EQ(j["rows"].size(), 2u);
}

TEST(CliMcBenchmark, NeedsFullModel) { EXPECT_THROW(run_command("mc-benchmark", quotes_config()), ConfigError); }

TEST(CliVegaProfile, ZeroDriftHedgeLeavesNoVega) {
    const json c = json::parse(R"({"vega_profile": {"vol": 0.09, "kind": "call", "strike": 1.0, "barrier": 0.97,
        "expiry": 0.5, "times_to_expiry": [0.5, 0.25], "spot_min": 0.975, "spot_max": 1.1, "points": 26}})");
    const auto r = run_command("vega-profile", c);
    for (const auto& p : r.summary["profiles"])
        EXPECT_LT(p["max_abs_hedged_vega"].get<double>(), 0.01 * p["max_abs_barrier_vega"].get<double>());
}

TEST(CliVegaProfile, DriftedHedgeIsSmallButVisible) {
    const json c = json::parse(R"({"vega_profile": {"vol": 0.09, "rate_asset": 0.05, "kind": "call", "strike": 1.0,
        "barrier": 0.97, "expiry": 0.5, "spots": [0.98, 1.0, 1.02, 1.05]}})");
    const auto r = run_command("vega-profile", c);
    for (const auto& p : r.summary["profiles"]) {
        const double pre = p["max_abs_barrier_vega"], post = p["max_abs_hedged_vega"];
        EXPECT_LT(post, 0.5 * pre);
        EXPECT_GT(post, 0.01 * pre);
    }
}

TEST(CliEstimate, CsvParseErrorCarriesLineNumber) {
    const auto dir = temp_dir();
    std::ofstream(dir / "bad.csv") << "date,spot,atm_3m,atm_1y,rr25_3m,rr25_1y\n2020-01-02,1.1,0.06,0.07,-0.01,x\n";
    const json c = json::parse(R"({"estimate": {"csv": "bad.csv"}})");
    try {
        run_command("estimate", c, dir);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(CliEstimate, SyntheticRunProducesSummary) {
    const json c = json::parse(R"({"engine": {"seed": 3}, "estimate": {"synthetic": {"epsilon": 7.5, "rho_bar": -0.2,
        "rr_scale": 0.06, "days": 400}}})");
    const auto r = run_command("estimate", c);
    EXPECT_EQ(r.table.rows.size(), 400u - 252u);
    EXPECT_NEAR(r.summary["beta"].get<double>(), 2.0, 0.2);
    EXPECT_TRUE(r.summary.contains("xi_mean"));
}

TEST(CliBinary, ExitCodes) {
    const std::string src = SVSC_SOURCE_DIR;
    EXPECT_EQ(run_binary("calibrate --config " + src + "/tables/fig1_calibrate.json"), kExitOk);
    EXPECT_EQ(run_binary("price --config " + src + "/tables/desk_quotes.json --format json"), kExitOk);
    EXPECT_EQ(run_binary("price --config " + src + "/tables/fig1_calibrate.json"), kExitConfig);
    EXPECT_EQ(run_binary("price --config /nonexistent.json"), kExitConfig);
    EXPECT_EQ(run_binary("price --config " + src + "/tables/desk_quotes.json --format xml"), kExitConfig);
    EXPECT_EQ(run_binary(""), kExitConfig);
}

TEST(CliBinary, OutputFileIsReproducible) {
    const auto dir = temp_dir();
    const std::string src = SVSC_SOURCE_DIR;
    const std::string base = "mc-benchmark --config " + src + "/tables/onetouch_mu0.json --paths 2000 --steps 20 --out ";
    ASSERT_EQ(run_binary(base + (dir / "a.csv").string()), kExitOk);
    ASSERT_EQ(run_binary(base + (dir / "b.csv").string()), kExitOk);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_NE(slurp(dir / "a.csv").find("# seed: 42"), std::string::npos);
}
