#include <exception>
#include <fstream>
#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "svsc/cli.hpp"

namespace fs = std::filesystem;
using namespace svsc::cli;

namespace {

bool write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SVSC pricing: Heston calibration, barrier and one-touch approximation, Monte Carlo, estimation"};
    app.set_version_flag("--version", std::string("svsc ") + version());
    app.require_subcommand(1);

    std::string config_path, out_path;
    Overrides ov;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", ov.seed, "engine.seed");
        sub->add_option("--paths", ov.paths, "engine.paths");
        sub->add_option("--steps", ov.steps, "engine.steps");
        sub->add_option("--buckets", ov.buckets, "engine.buckets");
        sub->add_option("--out", out_path, "output file (default stdout)");
        sub->add_option("--format", ov.format, "output.format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--bp", ov.bp, "prices in basis points of notional");
    };
    const std::pair<const char*, const char*> commands[] = {
        {"calibrate", "fit Heston (v, alpha, rho) to three quotes per tenor"},
        {"price", "approximation, closed forms and simulation for an instrument list"},
        {"mc-benchmark", "SVSC Monte Carlo prices with standard errors"},
        {"smile", "SVSC and Heston implied volatility smiles"},
        {"vega-profile", "barrier vega against spot, before and after the vanilla hedge"},
        {"estimate", "beta, gamma and xi from a daily vol history"}};
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    Report report;
    try {
        json cfg = load_config(config_path);
        apply_overrides(cfg, ov);
        report = run_command(command, cfg, fs::path(config_path).parent_path());
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPartial;
    }

    for (const auto& line : report.log) std::cerr << line << '\n';

    const std::string& fmt = report.format;
    const std::string text = fmt == "json" ? render_json(report) : render_csv(report);

    if (out_path.empty()) {
        std::cout << text;
    } else {
        if (!write_file(out_path, text)) {
            std::cerr << "error: cannot write " << out_path << '\n';
            return kExitPartial;
        }
        if (fmt == "csv" && command == "estimate") {
            fs::path summary = out_path;
            summary.replace_extension(".summary.json");
            if (!write_file(summary, render_summary_json(report))) {
                std::cerr << "error: cannot write " << summary << '\n';
                return kExitPartial;
            }
        }
    }
    return report.exit_code;
}
