#pragma once

// Run configuration: an INI file of `[section] key = value` entries plus
// `section.key=value` overrides, resolved into a typed RunConfig. Every
// problem found is collected; nothing stops at the first failure.

#include "spillover/common.hpp"
#include "spillover/connectedness.hpp"
#include "spillover/diagnostics.hpp"
#include "spillover/hedging.hpp"
#include "spillover/panel.hpp"
#include "spillover/qvar.hpp"
#include "spillover/synthlab.hpp"
#include "spillover/tvp_var.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace spillover {

struct ConfigIssue {
    std::string key;
    std::string message;
};

class ConfigError : public InvalidInput {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues)
        : InvalidInput(summary(issues)), issues_(std::move(issues)) {}

    [[nodiscard]] const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

private:
    std::vector<ConfigIssue> issues_;

    static std::string summary(const std::vector<ConfigIssue>& issues) {
        std::string s = std::to_string(issues.size()) + " configuration error(s)";
        for (const auto& i : issues) s += "\n  " + (i.key.empty() ? std::string("<config>") : i.key) + ": " + i.message;
        return s;
    }
};

using KeyValues = std::map<std::string, std::string>;

enum class DataSource { file, synthetic };
enum class CointegrationInput { log_levels, returns };

struct RunConfig {
    // [data]
    DataSource source = DataSource::synthetic;
    std::filesystem::path prices;
    std::filesystem::path meta;
    Schema schema = Schema::wide;

    // [simulate]
    synth::Scenario scenario = synth::Scenario::one_way_transmitter;
    std::size_t series = 5;
    std::size_t length = 750;
    double own = 0.3;
    double strength = 0.4;
    double coupling = 0.2;
    double correlation = 0.3;
    std::size_t regime_index = 0;
    double regime_coef_scale = 1.0;
    double regime_cov_scale = 1.0;
    std::vector<std::string> ids;
    std::vector<Role> roles;

    // [analysis]
    std::optional<std::size_t> lag = 1;  // empty = BIC selection up to max_lag
    std::size_t max_lag = 4;
    std::size_t horizon = 10;
    double level = 0.05;
    FevdMethod fevd = FevdMethod::generalized;
    std::size_t q_lags = 20;

    // [test]
    std::optional<std::size_t> adf_max_lag;
    LagRule adf_lag_rule = LagRule::info_criterion;
    CointegrationInput cointegration_input = CointegrationInput::log_levels;
    std::size_t chow_reps = 499;

    TvpConfig tvp;

    // [qvar]
    std::vector<double> quantiles = default_quantile_grid();
    std::size_t qvar_window = 120;
    std::size_t qvar_stride = 1;
    QvarCovariance qvar_covariance = QvarCovariance::residual_cross_product;

    // [rolling]
    std::vector<std::size_t> windows{60, 120, 180, 360};

    // [event]
    std::optional<Date> split_date;

    // [hedge]
    CovSourceConfig hedge;
    HedgeForm hedge_form = HedgeForm::verbatim;
    PairList pairs;  // empty = every ordered pair

    // [network]
    double threshold = 5.0;

    // [output]
    std::filesystem::path output_dir = "out";
    bool svg = false;

    // [run]
    std::uint64_t seed = 1;
};

namespace detail {

struct KeySpec {
    const char* key;
    const char* fallback;  // default as text, "" = unset
};

// Every accepted key with its default. Order fixes the echo order.
inline const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys = {
        {"data.source", "synthetic"},
        {"data.prices", ""},
        {"data.meta", ""},
        {"data.schema", "wide"},
        {"simulate.scenario", "one_way_transmitter"},
        {"simulate.series", "5"},
        {"simulate.length", "750"},
        {"simulate.own", "0.3"},
        {"simulate.strength", "0.4"},
        {"simulate.coupling", "0.2"},
        {"simulate.correlation", "0.3"},
        {"simulate.regime_index", "0"},
        {"simulate.regime_coef_scale", "1"},
        {"simulate.regime_cov_scale", "1"},
        {"simulate.ids", ""},
        {"simulate.roles", ""},
        {"analysis.lag", "1"},
        {"analysis.max_lag", "4"},
        {"analysis.horizon", "10"},
        {"analysis.level", "0.05"},
        {"analysis.fevd", "generalized"},
        {"analysis.q_lags", "20"},
        {"test.adf_max_lag", ""},
        {"test.adf_lag_rule", "bic"},
        {"test.cointegration_input", "log_levels"},
        {"test.chow_reps", "499"},
        {"tvp.lag", "1"},
        {"tvp.kappa1", "0.99"},
        {"tvp.kappa2", "0.96"},
        {"tvp.prior_scale", "0.1"},
        {"tvp.burn_in", "20"},
        {"tvp.init_window", "100"},
        {"qvar.quantiles", "0.05,0.15,0.25,0.35,0.45,0.55,0.65,0.75,0.85,0.95"},
        {"qvar.window", "120"},
        {"qvar.stride", "1"},
        {"qvar.covariance", "residual_cross_product"},
        {"rolling.windows", "60,120,180,360"},
        {"event.split_date", ""},
        {"hedge.source", "tvp_residual"},
        {"hedge.lambda", "0.94"},
        {"hedge.ewma_init", "30"},
        {"hedge.window", "120"},
        {"hedge.form", "verbatim"},
        {"hedge.pairs", ""},
        {"network.threshold", "5"},
        {"output.dir", "out"},
        {"output.svg", "false"},
        {"run.seed", "1"},
    };
    return keys;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        auto t = std::string(trim(cur));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

class Reader {
public:
    Reader(const KeyValues& kv, std::vector<ConfigIssue>& issues) : kv_(kv), issues_(issues) {}

    [[nodiscard]] std::string text(const std::string& key) const {
        auto it = kv_.find(key);
        if (it != kv_.end()) return it->second;
        for (const auto& k : config_keys())
            if (key == k.key) return k.fallback;
        return {};
    }

    void fail(const std::string& key, const std::string& msg) { issues_.push_back({key, msg}); }

    template <class T>
    bool number(const std::string& key, T& out) {
        const std::string s = text(key);
        T v{};
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
            fail(key, "expected a " + std::string(std::is_integral_v<T> ? "non-negative integer" : "number") +
                          ", got '" + s + "'");
            return false;
        }
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(v)) {
                fail(key, "value must be finite");
                return false;
            }
        }
        out = v;
        return true;
    }

    bool flag(const std::string& key, bool& out) {
        const std::string s = text(key);
        if (s == "true" || s == "1" || s == "yes" || s == "on") out = true;
        else if (s == "false" || s == "0" || s == "no" || s == "off") out = false;
        else {
            fail(key, "expected true or false, got '" + s + "'");
            return false;
        }
        return true;
    }

    template <class F>
    void parse(const std::string& key, F&& f) {
        try {
            f(text(key));
        } catch (const std::exception& e) {
            fail(key, e.what());
        }
    }

private:
    const KeyValues& kv_;
    std::vector<ConfigIssue>& issues_;
};

}  // namespace detail

/// Flattens an INI file into `section.key` entries. Keys outside a section
/// are rejected. Throws ConfigError when the file is missing or malformed.
inline KeyValues read_ini(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw ConfigError({{"", "config file not found: " + path.string()}});
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError({{"", "cannot parse " + path.string() + " line " + std::to_string(e.line()) + ": " + e.message()}});
    }
    KeyValues kv;
    std::vector<ConfigIssue> issues;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            issues.push_back({section, "key outside any [section]"});
            continue;
        }
        for (const auto& [key, value] : body) kv[section + "." + key] = std::string(detail::trim(value.data()));
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return kv;
}

/// Parses `section.key=value`.
inline std::pair<std::string, std::string> parse_override(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError({{s, "override must look like section.key=value"}});
    return {std::string(detail::trim(s.substr(0, eq))), std::string(detail::trim(s.substr(eq + 1)))};
}

/// Builds the typed configuration. Relative data paths resolve against `base`.
/// Throws ConfigError listing every problem found.
inline RunConfig build_config(const KeyValues& kv, const std::filesystem::path& base = {}) {
    std::vector<ConfigIssue> issues;
    for (const auto& [key, value] : kv) {
        const auto& keys = detail::config_keys();
        if (std::none_of(keys.begin(), keys.end(), [&](const detail::KeySpec& k) { return key == k.key; }))
            issues.push_back({key, "unknown key"});
    }
    detail::Reader r(kv, issues);
    RunConfig c;

    r.parse("data.source", [&](const std::string& s) {
        if (s == "file") c.source = DataSource::file;
        else if (s == "synthetic") c.source = DataSource::synthetic;
        else throw InvalidInput("expected file or synthetic, got '" + s + "'");
    });
    auto resolve = [&](const std::string& s) {
        std::filesystem::path p(s);
        return p.is_relative() && !base.empty() ? base / p : p;
    };
    if (!r.text("data.prices").empty()) c.prices = resolve(r.text("data.prices"));
    if (!r.text("data.meta").empty()) c.meta = resolve(r.text("data.meta"));
    if (c.source == DataSource::file) {
        if (c.prices.empty()) r.fail("data.prices", "required when data.source = file");
        else if (!std::filesystem::is_regular_file(c.prices)) r.fail("data.prices", "file not found: " + c.prices.string());
        if (!c.meta.empty() && !std::filesystem::is_regular_file(c.meta))
            r.fail("data.meta", "file not found: " + c.meta.string());
    }
    r.parse("data.schema", [&](const std::string& s) {
        if (s == "wide") c.schema = Schema::wide;
        else if (s == "long") c.schema = Schema::long_format;
        else throw InvalidInput("expected wide or long, got '" + s + "'");
    });

    r.parse("simulate.scenario", [&](const std::string& s) { c.scenario = synth::parse_scenario(s); });
    if (r.number("simulate.series", c.series) && c.series < 2) r.fail("simulate.series", "need at least 2 series");
    if (r.number("simulate.length", c.length) && c.length < 50) r.fail("simulate.length", "need at least 50 rows");
    r.number("simulate.own", c.own);
    r.number("simulate.strength", c.strength);
    r.number("simulate.coupling", c.coupling);
    if (r.number("simulate.correlation", c.correlation) && !(std::abs(c.correlation) < 1.0))
        r.fail("simulate.correlation", "must lie in (-1, 1)");
    r.number("simulate.regime_index", c.regime_index);
    if (r.number("simulate.regime_coef_scale", c.regime_coef_scale) && c.regime_coef_scale < 0.0)
        r.fail("simulate.regime_coef_scale", "must be non-negative");
    if (r.number("simulate.regime_cov_scale", c.regime_cov_scale) && !(c.regime_cov_scale > 0.0))
        r.fail("simulate.regime_cov_scale", "must be positive");
    c.ids = detail::split_list(r.text("simulate.ids"));
    r.parse("simulate.roles", [&](const std::string& s) {
        for (const auto& role : detail::split_list(s)) c.roles.push_back(parse_role(role));
    });
    if (c.source == DataSource::synthetic) {
        if (!c.ids.empty() && c.ids.size() != c.series) r.fail("simulate.ids", "count must equal simulate.series");
        if (!c.roles.empty() && c.roles.size() != c.series) r.fail("simulate.roles", "count must equal simulate.series");
        if (std::set<std::string>(c.ids.begin(), c.ids.end()).size() != c.ids.size())
            r.fail("simulate.ids", "ids must be unique");
        if (c.scenario == synth::Scenario::regime_change && (c.regime_index == 0 || c.regime_index >= c.length))
            r.fail("simulate.regime_index", "must lie strictly inside the simulated sample");
    }

    if (r.text("analysis.lag") == "bic") c.lag.reset();
    else {
        std::size_t lag = 0;
        if (r.number("analysis.lag", lag)) {
            if (lag == 0) r.fail("analysis.lag", "must be at least 1 (or 'bic')");
            c.lag = lag;
        }
    }
    if (r.number("analysis.max_lag", c.max_lag) && c.max_lag == 0) r.fail("analysis.max_lag", "must be at least 1");
    if (r.number("analysis.horizon", c.horizon) && c.horizon == 0) r.fail("analysis.horizon", "must be at least 1");
    if (r.number("analysis.level", c.level) && !(c.level > 0.0 && c.level < 1.0))
        r.fail("analysis.level", "must lie in (0, 1)");
    r.parse("analysis.fevd", [&](const std::string& s) { c.fevd = parse_fevd_method(s); });
    if (r.number("analysis.q_lags", c.q_lags) && c.q_lags == 0) r.fail("analysis.q_lags", "must be at least 1");

    if (!r.text("test.adf_max_lag").empty()) {
        std::size_t v = 0;
        if (r.number("test.adf_max_lag", v)) c.adf_max_lag = v;
    }
    r.parse("test.adf_lag_rule", [&](const std::string& s) {
        if (s == "bic") c.adf_lag_rule = LagRule::info_criterion;
        else if (s == "fixed") c.adf_lag_rule = LagRule::fixed;
        else throw InvalidInput("expected bic or fixed, got '" + s + "'");
    });
    r.parse("test.cointegration_input", [&](const std::string& s) {
        if (s == "log_levels") c.cointegration_input = CointegrationInput::log_levels;
        else if (s == "returns") c.cointegration_input = CointegrationInput::returns;
        else throw InvalidInput("expected log_levels or returns, got '" + s + "'");
    });
    if (r.number("test.chow_reps", c.chow_reps) && c.chow_reps < 19) r.fail("test.chow_reps", "must be at least 19");

    if (r.number("tvp.lag", c.tvp.lag) && c.tvp.lag == 0) r.fail("tvp.lag", "must be at least 1");
    if (r.number("tvp.kappa1", c.tvp.kappa1) && !(c.tvp.kappa1 > 0.0 && c.tvp.kappa1 <= 1.0))
        r.fail("tvp.kappa1", "must lie in (0, 1]");
    if (r.number("tvp.kappa2", c.tvp.kappa2) && !(c.tvp.kappa2 > 0.0 && c.tvp.kappa2 <= 1.0))
        r.fail("tvp.kappa2", "must lie in (0, 1]");
    if (r.number("tvp.prior_scale", c.tvp.prior_scale) && !(c.tvp.prior_scale > 0.0))
        r.fail("tvp.prior_scale", "must be positive");
    r.number("tvp.burn_in", c.tvp.burn_in);
    r.number("tvp.init_window", c.tvp.init_window);

    r.parse("qvar.quantiles", [&](const std::string& s) {
        c.quantiles.clear();
        for (const auto& q : detail::split_list(s)) {
            std::size_t used = 0;
            double v = std::stod(q, &used);
            if (used != q.size()) throw InvalidInput("bad quantile '" + q + "'");
            c.quantiles.push_back(v);
        }
        if (c.quantiles.empty()) throw InvalidInput("quantile grid is empty");
        for (std::size_t k = 0; k < c.quantiles.size(); ++k) {
            check_tau(c.quantiles[k]);
            if (k > 0 && !(c.quantiles[k] > c.quantiles[k - 1]))
                throw InvalidInput("quantiles must be strictly increasing");
        }
    });
    if (r.number("qvar.window", c.qvar_window) && c.qvar_window < 10) r.fail("qvar.window", "must be at least 10");
    if (r.number("qvar.stride", c.qvar_stride) && c.qvar_stride == 0) r.fail("qvar.stride", "must be at least 1");
    r.parse("qvar.covariance", [&](const std::string& s) { c.qvar_covariance = parse_qvar_covariance(s); });

    r.parse("rolling.windows", [&](const std::string& s) {
        c.windows.clear();
        for (const auto& w : detail::split_list(s)) {
            std::size_t used = 0;
            const long long v = std::stoll(w, &used);
            if (used != w.size() || v < 2) throw InvalidInput("bad window '" + w + "'");
            c.windows.push_back(static_cast<std::size_t>(v));
        }
        if (c.windows.empty()) throw InvalidInput("window list is empty");
        for (std::size_t k = 1; k < c.windows.size(); ++k)
            if (!(c.windows[k] > c.windows[k - 1])) throw InvalidInput("windows must be sorted ascending without repeats");
    });

    r.parse("event.split_date", [&](const std::string& s) {
        if (!s.empty()) c.split_date = Date::parse(s);
    });

    r.parse("hedge.source", [&](const std::string& s) { c.hedge.source = parse_cov_source(s); });
    if (r.number("hedge.lambda", c.hedge.lambda) && !(c.hedge.lambda > 0.0 && c.hedge.lambda <= 1.0))
        r.fail("hedge.lambda", "must lie in (0, 1]");
    if (r.number("hedge.ewma_init", c.hedge.ewma_init) && c.hedge.ewma_init == 0)
        r.fail("hedge.ewma_init", "must be at least 1");
    if (r.number("hedge.window", c.hedge.window) && c.hedge.window < 2) r.fail("hedge.window", "must be at least 2");
    r.parse("hedge.form", [&](const std::string& s) { c.hedge_form = parse_hedge_form(s); });
    r.parse("hedge.pairs", [&](const std::string& s) {
        for (const auto& p : detail::split_list(s)) {
            const auto colon = p.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == p.size())
                throw InvalidInput("pair '" + p + "' must look like LONG:SHORT");
            c.pairs.emplace_back(p.substr(0, colon), p.substr(colon + 1));
        }
    });
    c.hedge.tvp = c.tvp;

    if (r.number("network.threshold", c.threshold) && c.threshold < 0.0)
        r.fail("network.threshold", "must be non-negative");
    c.output_dir = r.text("output.dir");
    if (c.output_dir.empty()) r.fail("output.dir", "must not be empty");
    r.flag("output.svg", c.svg);
    r.number("run.seed", c.seed);

    if (!issues.empty()) throw ConfigError(std::move(issues));
    return c;
}

/// Effective key/value view of a configuration source (defaults filled in),
/// excluding output location so echoes are independent of where a run writes.
inline KeyValues effective_settings(const KeyValues& kv) {
    KeyValues out;
    for (const auto& k : detail::config_keys()) {
        if (std::string(k.key) == "output.dir") continue;
        auto it = kv.find(k.key);
        out[k.key] = it != kv.end() ? it->second : k.fallback;
    }
    return out;
}

}  // namespace spillover
