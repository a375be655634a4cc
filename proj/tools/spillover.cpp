// spillover: connectedness, quantile and hedging reports from a config file.
//
//   spillover <subcommand> [--config FILE] [--set section.key=value ...] [flags]
//
// Exit codes: 0 ok, 1 computation error, 2 configuration error.
// SPILLOVER_OUTPUT_DIR overrides output.dir; --output-dir overrides both.

#include "spillover/report.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using namespace spillover;

struct Flags {
    std::string config;
    std::vector<std::string> sets;
    std::string output_dir;
    std::string seed;
    std::string kappa1;
    std::string split_date;
    std::string windows;
    std::string quantiles;
    bool svg = false;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("-c,--config", f.config, "INI configuration file");
    sub->add_option("-s,--set", f.sets, "override, section.key=value (repeatable)");
    sub->add_option("-o,--output-dir", f.output_dir, "output directory");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--kappa1", f.kappa1, "TVP state forgetting factor");
    sub->add_option("--split-date", f.split_date, "event split date, YYYY-MM-DD");
    sub->add_option("--windows", f.windows, "rolling windows, comma separated");
    sub->add_option("--quantiles", f.quantiles, "QVAR quantile grid, comma separated");
    sub->add_flag("--svg", f.svg, "also write SVG heatmaps");
}

fs::path output_dir(const Flags& f, const KeyValues& kv) {
    if (!f.output_dir.empty()) return f.output_dir;
    if (const char* env = std::getenv("SPILLOVER_OUTPUT_DIR"); env && *env) return env;
    if (auto it = kv.find("output.dir"); it != kv.end() && !it->second.empty()) return it->second;
    return "out";
}

KeyValues merged_settings(const Flags& f) {
    KeyValues kv = f.config.empty() ? KeyValues{} : read_ini(f.config);
    auto put = [&](const char* key, const std::string& v) {
        if (!v.empty()) kv[key] = v;
    };
    put("run.seed", f.seed);
    put("tvp.kappa1", f.kappa1);
    put("event.split_date", f.split_date);
    put("rolling.windows", f.windows);
    put("qvar.quantiles", f.quantiles);
    if (f.svg) kv["output.svg"] = "true";
    for (const auto& s : f.sets) {
        auto [k, v] = parse_override(s);
        kv[k] = v;
    }
    kv["output.dir"] = output_dir(f, kv).string();
    return kv;
}

void write_error(const fs::path& dir, const std::string& command, const std::string& kind, const std::string& message,
                 const std::vector<ConfigIssue>& issues = {}) {
    try {
        write_atomic(dir / "error.json", error_json(command, kind, message, issues));
    } catch (const std::exception& e) {
        std::cerr << "spillover: could not write error.json: " << e.what() << '\n';
    }
}

int run(Command cmd, const Flags& f) {
    const std::string name = to_string(cmd);
    fs::path dir = output_dir(f, {});
    try {
        const KeyValues kv = merged_settings(f);
        dir = kv.at("output.dir");
        const fs::path base = f.config.empty() ? fs::path{} : fs::path(f.config).parent_path();
        const RunConfig cfg = build_config(kv, base);
        const auto files = run_command(cmd, cfg, effective_settings(kv));
        std::error_code ec;
        fs::remove(dir / "error.json", ec);
        std::cout << name << ": wrote " << files.size() << " files to " << dir.string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "spillover " << name << ": " << e.what() << '\n';
        write_error(dir, name, "config", "invalid configuration", e.issues());
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "spillover " << name << ": " << e.what() << '\n';
        write_error(dir, name, "computation", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spillover connectedness, quantile and hedging reports"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<Command, const char*>> commands{
        {Command::describe, "descriptive statistics, Jarque-Bera and Ljung-Box Q2"},
        {Command::test, "ADF, correlations, Chow and Engle-Granger tests"},
        {Command::var, "static VAR connectedness table and network"},
        {Command::tvp, "TVP-VAR dynamic connectedness"},
        {Command::qvar, "quantile VAR connectedness heatmaps"},
        {Command::rolling, "rolling-window robustness"},
        {Command::hedge, "hedge ratios and hedging effectiveness"},
        {Command::report, "every analysis stage"},
        {Command::simulate, "write a synthetic price panel and metadata"},
    };
    std::vector<std::pair<Command, CLI::App*>> subs;
    for (const auto& [cmd, help] : commands) {
        auto* sub = app.add_subcommand(to_string(cmd), help);
        add_flags(sub, flags);
        subs.emplace_back(cmd, sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (const auto& [cmd, sub] : subs)
        if (sub->parsed()) return run(cmd, flags);
    return 2;
}
