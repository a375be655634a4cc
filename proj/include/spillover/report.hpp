#pragma once

// Artifact emitters and the staged analysis pipeline behind the CLI.
// All text is produced with fixed formats and fixed ordering so that two runs
// with the same configuration write byte-identical files.

#include "spillover/config.hpp"
#include "spillover/connectedness.hpp"
#include "spillover/diagnostics.hpp"
#include "spillover/hedging.hpp"
#include "spillover/network.hpp"
#include "spillover/panel.hpp"
#include "spillover/qvar.hpp"
#include "spillover/synthlab.hpp"
#include "spillover/tvp_var.hpp"
#include "spillover/var.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace spillover {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Writes `content` to a sibling temporary file, then renames it over `path`.
inline void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Output directory plus the sorted list of files written into it.
class OutputTree {
public:
    explicit OutputTree(fs::path root) : root_(std::move(root)) {}

    void write(const std::string& relative, const std::string& content) {
        write_atomic(root_ / relative, content);
        files_.push_back(relative);
    }

    [[nodiscard]] const fs::path& root() const noexcept { return root_; }

    [[nodiscard]] std::vector<std::string> files() const {
        auto f = files_;
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
        return f;
    }

private:
    fs::path root_;
    std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

inline std::string fmt(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// CSV text with a leading `# table=<name>` line.
class CsvTable {
public:
    explicit CsvTable(const std::string& name) { text_ = "# table=" + name + "\n"; }

    CsvTable& comment(const std::string& key, const std::string& value) {
        text_ += "# " + key + "=" + value + "\n";
        return *this;
    }

    CsvTable& row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) text_ += ',';
            text_ += csv_field(cells[k]);
        }
        text_ += '\n';
        return *this;
    }

    [[nodiscard]] const std::string& str() const noexcept { return text_; }

private:
    std::string text_;
};

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline nlohmann::ordered_json matrix_json(const Matrix& m) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto r = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Table builders
// ---------------------------------------------------------------------------

inline std::string descriptive_csv(const std::vector<DescriptiveRow>& rows, std::size_t q_lags) {
    CsvTable t("descriptive_statistics");
    t.comment("q2_lags", std::to_string(q_lags));
    t.row({"id", "mean", "median", "sd", "skewness", "kurtosis", "jb_stat", "jb_p", "jb_sig", "q2_stat", "q2_p",
           "q2_sig"});
    for (const auto& r : rows)
        t.row({r.id, fmt(r.mean), fmt(r.median), fmt(r.sd), fmt(r.skewness), fmt(r.kurtosis), fmt(r.jb_stat),
               fmt(r.jb_p), significance_stars(r.jb_p), fmt(r.q2_stat), fmt(r.q2_p), significance_stars(r.q2_p)});
    return t.str();
}

/// Connectedness table: l_ij with FROM column, then TO / Inc.Own / NET / NPT rows.
inline std::string connectedness_csv(const std::string& name, const Matrix& l, const std::vector<std::string>& ids,
                                     std::size_t horizon) {
    const auto s = summarize(l);
    const auto n = static_cast<Eigen::Index>(ids.size());
    CsvTable t(name);
    t.comment("horizon", std::to_string(horizon));
    std::vector<std::string> head{""};
    head.insert(head.end(), ids.begin(), ids.end());
    head.push_back("FROM");
    t.row(head);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<std::string> r{ids[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < n; ++j) r.push_back(fmt(l(i, j)));
        r.push_back(fmt(s.receiver(i)));
        t.row(r);
    }
    auto summary_row = [&](const std::string& label, auto&& value, const std::string& last) {
        std::vector<std::string> r{label};
        for (Eigen::Index i = 0; i < n; ++i) r.push_back(value(i));
        r.push_back(last);
        t.row(r);
    };
    summary_row("TO", [&](Eigen::Index i) { return fmt(s.giver(i)); }, fmt(s.giver.sum()));
    summary_row("Inc.Own", [&](Eigen::Index i) { return fmt(s.inc_own(i)); }, "TCI");
    summary_row("NET", [&](Eigen::Index i) { return fmt(s.net(i)); }, fmt(s.tci));
    summary_row("NPT", [&](Eigen::Index i) { return std::to_string(s.npt[static_cast<std::size_t>(i)]); }, "");
    return t.str();
}

/// One row per date: TCI, quality flags and per-series NET.
inline std::string dynamic_series_csv(const std::string& name, const DynamicSeries& d,
                                      const std::vector<std::string>& ids) {
    CsvTable t(name);
    t.comment("horizon", std::to_string(d.horizon));
    std::vector<std::string> head{"date", "tci", "flags"};
    for (const auto& id : ids) head.push_back("net_" + id);
    t.row(head);
    for (std::size_t k = 0; k < d.size(); ++k) {
        std::vector<std::string> r{k < d.dates.size() ? d.dates[k].str() : std::to_string(k), fmt(d.summaries[k].tci),
                                   std::to_string(d.flags[k])};
        for (Eigen::Index i = 0; i < d.summaries[k].net.size(); ++i) r.push_back(fmt(d.summaries[k].net(i)));
        t.row(r);
    }
    return t.str();
}

/// Per date, TO and FROM for each series.
inline std::string directional_csv(const DynamicSeries& d, const std::vector<std::string>& ids) {
    CsvTable t("dynamic_directional_spillovers");
    std::vector<std::string> head{"date"};
    for (const auto& id : ids) head.push_back("to_" + id);
    for (const auto& id : ids) head.push_back("from_" + id);
    t.row(head);
    for (std::size_t k = 0; k < d.size(); ++k) {
        std::vector<std::string> r{d.dates[k].str()};
        for (Eigen::Index i = 0; i < d.summaries[k].giver.size(); ++i) r.push_back(fmt(d.summaries[k].giver(i)));
        for (Eigen::Index i = 0; i < d.summaries[k].receiver.size(); ++i) r.push_back(fmt(d.summaries[k].receiver(i)));
        t.row(r);
    }
    return t.str();
}

/// Long format NPDC_{i<-j} for i < j per date.
inline std::string npdc_csv(const DynamicSeries& d, const std::vector<std::string>& ids) {
    CsvTable t("dynamic_net_pairwise_directional");
    t.row({"date", "i", "j", "npdc_i_from_j"});
    for (std::size_t k = 0; k < d.size(); ++k)
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j)
                t.row({d.dates[k].str(), ids[i], ids[j],
                       fmt(d.npdc[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))});
    return t.str();
}

/// Rows are quantiles, columns are dates.
inline std::string heatmap_csv(const std::string& name, const Matrix& grid, const std::vector<double>& quantiles,
                               const std::vector<Date>& dates) {
    CsvTable t(name);
    std::vector<std::string> head{"tau"};
    for (const auto& d : dates) head.push_back(d.str());
    t.row(head);
    for (Eigen::Index q = 0; q < grid.rows(); ++q) {
        std::vector<std::string> r{fmt(quantiles[static_cast<std::size_t>(q)])};
        for (Eigen::Index w = 0; w < grid.cols(); ++w) r.push_back(fmt(grid(q, w)));
        t.row(r);
    }
    return t.str();
}

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '"') out += "&quot;";
        else out += c;
    }
    return out;
}

/// Diverging ramp: t in [-1, 1], blue (cold, low) through white to red (warm, high).
inline std::string ramp(double t) {
    t = std::clamp(t, -1.0, 1.0);
    int r, g, b;
    if (t >= 0.0) {
        r = 255;
        g = static_cast<int>(std::lround(255.0 * (1.0 - 0.8 * t)));
        b = static_cast<int>(std::lround(255.0 * (1.0 - 0.85 * t)));
    } else {
        r = static_cast<int>(std::lround(255.0 * (1.0 + 0.85 * t)));
        g = static_cast<int>(std::lround(255.0 * (1.0 + 0.6 * t)));
        b = 255;
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace detail

/// Self-contained SVG heatmap. Cells are colored by (v - center) / max|v - center|.
inline std::string heatmap_svg(const std::string& title, const Matrix& grid, const std::vector<double>& quantiles,
                               const std::vector<Date>& dates, double center) {
    const int cell_w = std::max(2, std::min(24, 720 / std::max<int>(1, static_cast<int>(grid.cols()))));
    const int cell_h = 22, left = 60, top = 36;
    const int width = left + cell_w * static_cast<int>(grid.cols()) + 20;
    const int height = top + cell_h * static_cast<int>(grid.rows()) + 40;
    const double span = std::max((grid.array() - center).abs().maxCoeff(), 1e-12);
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    s << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << detail::svg_escape(title)
      << "</text>\n";
    for (Eigen::Index q = 0; q < grid.rows(); ++q) {
        const int y = top + cell_h * static_cast<int>(grid.rows() - 1 - q);
        char label[32];
        std::snprintf(label, sizeof label, "%.2f", quantiles[static_cast<std::size_t>(q)]);
        s << "<text x=\"4\" y=\"" << y + 15 << "\" font-family=\"sans-serif\" font-size=\"11\">" << label << "</text>\n";
        for (Eigen::Index w = 0; w < grid.cols(); ++w)
            s << "<rect x=\"" << left + cell_w * static_cast<int>(w) << "\" y=\"" << y << "\" width=\"" << cell_w
              << "\" height=\"" << cell_h << "\" fill=\"" << detail::ramp((grid(q, w) - center) / span) << "\"/>\n";
    }
    if (!dates.empty()) {
        const int y = top + cell_h * static_cast<int>(grid.rows()) + 16;
        s << "<text x=\"" << left << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << dates.front().str() << "</text>\n";
        s << "<text x=\"" << width - 20 << "\" y=\"" << y
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << dates.back().str() << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct AnalysisData {
    TimeSeriesPanel levels;
    ReturnsPanel returns;
};

inline synth::SynthSpec synthetic_spec(const RunConfig& c) {
    synth::SynthSpec spec;
    switch (c.scenario) {
        case synth::Scenario::block_independent:
            spec = synth::block_independent(c.series, c.own, c.coupling, c.correlation);
            break;
        case synth::Scenario::one_way_transmitter:
        case synth::Scenario::regime_change:
            spec = synth::one_way_transmitter(c.series, c.own, c.strength);
            break;
        case synth::Scenario::custom:
            throw InvalidInput("the custom scenario has no config-driven builder");
    }
    spec.scenario = c.scenario;
    spec.length = c.length;
    spec.seed = c.seed;
    spec.regime_index = c.regime_index;
    spec.regime_coef_scale = c.regime_coef_scale;
    spec.regime_cov_scale = c.regime_cov_scale;
    return spec;
}

/// Price levels whose log returns are 0.01 times a draw from the scenario.
inline TimeSeriesPanel synthetic_levels(const RunConfig& c) {
    const Matrix r = synth::simulate_var(synthetic_spec(c));
    const Eigen::Index n = r.cols();
    Matrix levels(r.rows() + 1, n);
    levels.row(0).setConstant(100.0);
    for (Eigen::Index t = 0; t < r.rows(); ++t)
        levels.row(t + 1) = (levels.row(t).array() * (0.01 * r.row(t).array()).exp()).matrix();
    std::vector<SeriesMeta> meta;
    for (Eigen::Index i = 0; i < n; ++i) {
        SeriesMeta m;
        const auto k = static_cast<std::size_t>(i);
        m.id = k < c.ids.size() ? c.ids[k] : "S" + std::to_string(k + 1);
        m.role = k < c.roles.size() ? c.roles[k] : Role::other;
        meta.push_back(std::move(m));
    }
    auto dates = weekday_sequence(Date(2010, 1, 4), static_cast<std::size_t>(levels.rows()));
    return TimeSeriesPanel(std::move(dates), std::move(levels), std::move(meta));
}

inline std::string meta_csv(const std::vector<SeriesMeta>& meta) {
    std::string s = "id,role,esg_score,differencing\n";
    for (const auto& m : meta)
        s += csv_field(m.id) + "," + to_string(m.role) + "," + (m.esg_score ? fmt(*m.esg_score) : "") + "," +
             to_string(m.differencing) + "\n";
    return s;
}

inline std::string levels_csv(const TimeSeriesPanel& p) {
    std::ostringstream s;
    write_wide_csv(s, p.dates(), p.values(), p.meta());
    return s.str();
}

inline AnalysisData load_data(const RunConfig& c) {
    if (c.source == DataSource::synthetic) {
        auto levels = synthetic_levels(c);
        auto returns = log_returns(levels);
        return {std::move(levels), std::move(returns)};
    }
    std::vector<SeriesMeta> meta;
    if (!c.meta.empty()) {
        std::ifstream in(c.meta);
        if (!in) throw InvalidInput("cannot open " + c.meta.string());
        meta = load_meta(in);
    }
    std::ifstream in(c.prices);
    if (!in) throw InvalidInput("cannot open " + c.prices.string());
    auto levels = load_panel(in, c.schema, meta);
    auto returns = log_returns(levels);
    return {std::move(levels), std::move(returns)};
}

/// Log levels for log-differenced series, raw levels otherwise.
inline Matrix transformed_levels(const TimeSeriesPanel& p) {
    Matrix m = p.values();
    for (std::size_t j = 0; j < p.width(); ++j)
        if (p.meta()[j].differencing == Differencing::log)
            m.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(j)).array().log().matrix();
    return m;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Non-fatal observations collected while running stages.
struct RunNotes {
    std::vector<std::string> warnings;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
};

inline void stage_describe(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    out.write("describe/descriptive_statistics.csv", descriptive_csv(describe(d.returns, c.q_lags), c.q_lags));
    notes.stages["describe"] = {{"observations", d.returns.length()}, {"series", d.returns.width()}};
}

inline void stage_test(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    const auto ids = d.returns.ids();
    AdfOptions adf;
    adf.max_lag = c.adf_max_lag;
    adf.lag_rule = c.adf_lag_rule;
    adf.level = c.level;

    CsvTable unit("unit_root_adf");
    unit.row({"id", "input", "statistic", "p_value", "sig", "lag", "nobs", "cv_1pct", "cv_5pct", "cv_10pct",
              "decision"});
    const Matrix lv = transformed_levels(d.levels);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto row = [&](const std::string& input, const Vector& x) {
            auto r = adf_test(x, adf);
            unit.row({ids[i], input, fmt(r.test.statistic), fmt(r.test.p_value), significance_stars(r.test.p_value),
                      std::to_string(r.test.lag), std::to_string(r.nobs), fmt(r.critical.one_pct),
                      fmt(r.critical.five_pct), fmt(r.critical.ten_pct), r.test.rejected() ? "reject" : "fail_to_reject"});
        };
        row("levels", lv.col(static_cast<Eigen::Index>(i)));
        row("returns", d.returns.column(i));
    }
    out.write("test/unit_root_adf.csv", unit.str());

    const std::size_t p = c.lag.value_or(select_lag_bic(d.returns, c.max_lag));
    const auto model = fit_var(d.returns, p);
    const auto ret = return_correlations(d.returns.values());
    const auto res = residual_correlations(model);
    CsvTable corr("correlations");
    corr.comment("var_lag", std::to_string(p));
    corr.row({"i", "j", "return_correlation", "return_partial", "residual_correlation", "residual_partial"});
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            corr.row({ids[i], ids[j], fmt(ret.conditional(a, b)), fmt(ret.partial(a, b)), fmt(res.conditional(a, b)),
                      fmt(res.partial(a, b))});
        }
    out.write("test/correlations.csv", corr.str());

    if (c.split_date) {
        ChowOptions chow;
        chow.lag = p;
        chow.bootstrap_reps = c.chow_reps;
        chow.seed = c.seed;
        chow.level = c.level;
        const auto split = split_at(d.returns, *c.split_date);
        const auto r = chow_test(d.returns, split, chow);
        CsvTable t("chow_stability");
        t.comment("split_date", c.split_date->str());
        t.comment("bootstrap_reps", std::to_string(c.chow_reps));
        t.row({"test", "statistic", "p_value", "sig", "critical_5pct", "decision"});
        t.row({"break_point", fmt(r.break_point.statistic), fmt(r.break_point.p_value),
               significance_stars(r.break_point.p_value), fmt(r.break_point_critical),
               r.break_point.rejected() ? "reject" : "fail_to_reject"});
        t.row({"sample_split", fmt(r.sample_split.statistic), fmt(r.sample_split.p_value),
               significance_stars(r.sample_split.p_value), fmt(r.sample_split_critical),
               r.sample_split.rejected() ? "reject" : "fail_to_reject"});
        out.write("test/chow_stability.csv", t.str());
    } else {
        notes.warnings.push_back("no event.split_date: Chow stability test skipped");
    }

    const Matrix coint_data = c.cointegration_input == CointegrationInput::log_levels
                                  ? Matrix(lv.bottomRows(static_cast<Eigen::Index>(d.returns.length())))
                                  : d.returns.values();
    const auto cm = cointegration_matrix(coint_data, d.returns.meta(), adf);
    CsvTable ct("cointegration_engle_granger");
    ct.comment("input", c.cointegration_input == CointegrationInput::log_levels ? "log_levels" : "returns");
    ct.row({"dependent", "regressor", "statistic", "p_value", "sig", "lag", "intercept", "slope", "decision"});
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (i == j) continue;
            const auto& e = *cm.cells[i][j];
            ct.row({ids[i], ids[j], fmt(e.test.statistic), fmt(e.test.p_value), significance_stars(e.test.p_value),
                    std::to_string(e.test.lag), fmt(e.intercept), fmt(e.slope),
                    e.test.rejected() ? "reject" : "fail_to_reject"});
        }
    out.write("test/cointegration.csv", ct.str());

    CsvTable hyp("cointegration_hypotheses");
    hyp.row({"hypothesis", "first_role", "second_role", "pairs", "bidirectional", "supported"});
    for (const auto& h : cm.hypotheses)
        hyp.row({h.name, to_string(h.first), to_string(h.second), std::to_string(h.pairs),
                 std::to_string(h.bidirectional), h.pairs == 0 ? "not_applicable" : h.supported ? "yes" : "no"});
    out.write("test/cointegration_hypotheses.csv", hyp.str());
    notes.stages["test"] = {{"var_lag", p}};
}

inline void write_network(OutputTree& out, const std::string& stem, const Matrix& l,
                          const std::vector<std::string>& ids, double threshold, const std::string& name) {
    const auto g = build_network(summarize(l), npdc(l), ids, threshold);
    out.write(stem + ".dot", to_dot(g, name));
    out.write(stem + ".json", json_text(to_json(g)));
}

inline void static_connectedness(const RunConfig& c, const ReturnsPanel& r, std::size_t p, OutputTree& out,
                                 const std::string& dir, const std::string& label) {
    const auto ids = r.ids();
    const auto model = fit_var(r, p);
    const auto f = gfevd(model, c.horizon, c.fevd);
    out.write(dir + "/static_connectedness.csv", connectedness_csv("static_connectedness", f.table, ids, c.horizon));
    write_network(out, dir + "/network", f.table, ids, c.threshold, label);
    nlohmann::ordered_json j;
    j["lag"] = p;
    j["observations"] = r.length();
    j["spectral_radius"] = spectral_radius(model.coefficients);
    j["stable"] = f.stable;
    j["ids"] = ids;
    j["intercept"] = std::vector<double>(model.intercept.data(), model.intercept.data() + model.intercept.size());
    j["coefficients"] = nlohmann::ordered_json::array();
    for (const auto& phi : model.coefficients) j["coefficients"].push_back(matrix_json(phi));
    j["residual_cov"] = matrix_json(model.residual_cov);
    out.write(dir + "/model.json", json_text(j));
}

inline void stage_var(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    const std::size_t p = c.lag.value_or(select_lag_bic(d.returns, c.max_lag));
    static_connectedness(c, d.returns, p, out, "var", "static");
    nlohmann::ordered_json s{{"lag", p}, {"lag_policy", c.lag ? "fixed" : "bic"}};
    if (c.split_date) {
        const auto split = split_at(d.returns, *c.split_date);
        static_connectedness(c, split.before, p, out, "var/before", "before");
        static_connectedness(c, split.after, p, out, "var/after", "after");
        s["split_date"] = c.split_date->str();
    }
    notes.stages["var"] = s;
}

inline void stage_tvp(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    const auto ids = d.returns.ids();
    const auto path = fit_tvp_var(d.returns, c.tvp);
    const auto dyn = dynamic_connectedness(path, c.horizon, c.fevd);
    out.write("tvp/dynamic_connectedness.csv",
              connectedness_csv("dynamic_connectedness_average", dyn.average_table, ids, c.horizon));
    out.write("tvp/tci_net.csv", dynamic_series_csv("dynamic_total_and_net", dyn, ids));
    out.write("tvp/directional.csv", directional_csv(dyn, ids));
    out.write("tvp/npdc.csv", npdc_csv(dyn, ids));
    std::ostringstream coef;
    write_tvp_csv(coef, path, ids);
    out.write("tvp/coefficients.csv", "# table=tvp_coefficient_paths\n" + coef.str());
    write_network(out, "tvp/network", dyn.average_table, ids, c.threshold, "dynamic");
    std::size_t repaired = 0, unstable = 0;
    for (auto f : dyn.flags) {
        repaired += (f & flag_covariance_repaired) ? 1 : 0;
        unstable += (f & flag_unstable) ? 1 : 0;
    }
    if (unstable) notes.warnings.push_back("tvp: " + std::to_string(unstable) + " steps with an unstable companion matrix");
    notes.stages["tvp"] = {{"steps", dyn.size()}, {"repaired_steps", repaired}, {"unstable_steps", unstable}};
}

inline void stage_qvar(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    const auto ids = d.returns.ids();
    QvarGridConfig g;
    g.quantiles = c.quantiles;
    g.window = c.qvar_window;
    g.lag = c.lag.value_or(1);
    g.horizon = c.horizon;
    g.stride = c.qvar_stride;
    g.covariance = c.qvar_covariance;
    g.method = c.fevd;
    const auto res = qvar_connectedness_grid(d.returns, g);
    out.write("qvar/tci_heatmap.csv", heatmap_csv("quantile_tci_heatmap", res.tci, res.quantiles, res.dates));
    nlohmann::ordered_json j;
    j["quantiles"] = res.quantiles;
    j["dates"] = nlohmann::ordered_json::array();
    for (const auto& dt : res.dates) j["dates"].push_back(dt.str());
    j["window"] = g.window;
    j["lag"] = g.lag;
    j["horizon"] = g.horizon;
    j["tci"] = matrix_json(res.tci);
    j["net"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.write("qvar/net_heatmap_" + ids[i] + ".csv",
                  heatmap_csv("quantile_net_heatmap_" + ids[i], res.net[i], res.quantiles, res.dates));
        j["net"][ids[i]] = matrix_json(res.net[i]);
        if (c.svg)
            out.write("qvar/net_heatmap_" + ids[i] + ".svg",
                      heatmap_svg("NET " + ids[i] + " by quantile", res.net[i], res.quantiles, res.dates, 0.0));
    }
    j["unconverged_regressions"] = res.unconverged;
    out.write("qvar/heatmap.json", json_text(j));
    if (c.svg) out.write("qvar/tci_heatmap.svg", heatmap_svg("TCI by quantile", res.tci, res.quantiles, res.dates, res.tci.mean()));
    if (res.unconverged)
        notes.warnings.push_back("qvar: " + std::to_string(res.unconverged) + " quantile regressions hit the iteration cap");
    notes.stages["qvar"] = {{"windows", res.dates.size()}, {"unconverged_regressions", res.unconverged}};
}

/// Ranks 1 = largest NET.
inline std::vector<std::size_t> net_ranks(const Vector& net) {
    std::vector<std::size_t> order(static_cast<std::size_t>(net.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return net(static_cast<Eigen::Index>(a)) > net(static_cast<Eigen::Index>(b));
    });
    std::vector<std::size_t> rank(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k + 1;
    return rank;
}

inline void stage_rolling(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    const auto ids = d.returns.ids();
    const std::size_t p = c.lag.value_or(1);
    CsvTable robust("rolling_window_robustness");
    std::vector<std::string> head{"window", "windows", "mean_tci"};
    for (const auto& id : ids) head.push_back("net_" + id);
    for (const auto& id : ids) head.push_back("rank_" + id);
    robust.row(head);
    std::vector<std::vector<std::size_t>> all_ranks;
    for (auto w : c.windows) {
        const auto rs = rolling_connectedness(d.returns, w, p, c.horizon, c.fevd);
        char name[32];
        std::snprintf(name, sizeof name, "rolling/window_%03zu.csv", w);
        out.write(name, dynamic_series_csv("rolling_connectedness_window_" + std::to_string(w), rs, ids));
        const auto ranks = net_ranks(rs.average.net);
        std::vector<std::string> r{std::to_string(w), std::to_string(rs.size()), fmt(rs.tci().mean())};
        for (Eigen::Index i = 0; i < rs.average.net.size(); ++i) r.push_back(fmt(rs.average.net(i)));
        for (auto k : ranks) r.push_back(std::to_string(k));
        robust.row(r);
        all_ranks.push_back(ranks);
    }
    const bool stable = std::all_of(all_ranks.begin(), all_ranks.end(), [&](const auto& r) { return r == all_ranks.front(); });
    robust.comment("rank_order_identical", stable ? "yes" : "no");
    out.write("rolling/robustness.csv", robust.str());
    notes.stages["rolling"] = {{"windows", c.windows}, {"rank_order_identical", stable}};
}

/// Long/short panels side by side for each unordered pair (i < j).
inline std::string hedge_table_csv(const std::vector<HedgePair>& pairs, const ReturnsPanel& r) {
    CsvTable t("hedge_ratio_effectiveness");
    t.row({"long", "short", "hr_mean", "he", "hr_mv", "long_rev", "short_rev", "hr_mean_rev", "he_rev", "hr_mv_rev"});
    auto find = [&](const std::string& l, const std::string& s) -> const HedgePair* {
        for (const auto& p : pairs)
            if (p.long_id == l && p.short_id == s) return &p;
        return nullptr;
    };
    std::vector<std::pair<std::string, std::string>> done;
    for (const auto& p : pairs) {
        if (std::find(done.begin(), done.end(), std::make_pair(p.short_id, p.long_id)) != done.end()) continue;
        done.emplace_back(p.long_id, p.short_id);
        const double mv = hedge_ratio_mv(r.column(r.index_of(p.long_id)), r.column(r.index_of(p.short_id)));
        std::vector<std::string> row{p.long_id, p.short_id, fmt(p.hr_mean), fmt(p.he), fmt(mv)};
        if (const auto* q = find(p.short_id, p.long_id)) {
            const double mv_rev = hedge_ratio_mv(r.column(r.index_of(q->long_id)), r.column(r.index_of(q->short_id)));
            row.insert(row.end(), {q->long_id, q->short_id, fmt(q->hr_mean), fmt(q->he), fmt(mv_rev)});
        } else {
            row.insert(row.end(), {"", "", "", "", ""});
        }
        t.row(row);
    }
    return t.str();
}

inline void stage_hedge(const RunConfig& c, const AnalysisData& d, OutputTree& out, RunNotes& notes) {
    const auto pairs = c.pairs.empty() ? all_pairs(d.returns.ids()) : c.pairs;
    for (const auto& [l, s] : pairs) {
        (void)d.returns.index_of(l);
        (void)d.returns.index_of(s);
    }
    const auto cov = conditional_cov_series(d.returns, c.hedge);
    const auto full = hedge_pairs(pairs, cov, c.hedge_form);
    out.write("hedge/hedge_ratios.csv", hedge_table_csv(full, d.returns));

    CsvTable series("hedge_ratio_series");
    std::vector<std::string> h{"date"};
    for (const auto& p : full) h.push_back(p.long_id + "/" + p.short_id);
    series.row(h);
    for (std::size_t t = 0; t < cov.size(); ++t) {
        std::vector<std::string> r{cov.dates[t].str()};
        for (const auto& p : full) r.push_back(fmt(p.hr(static_cast<Eigen::Index>(t))));
        series.row(r);
    }
    out.write("hedge/hedge_ratio_series.csv", series.str());

    nlohmann::ordered_json s{{"source", to_string(c.hedge.source)}, {"form", to_string(c.hedge_form)},
                             {"pairs", pairs.size()}};
    if (c.split_date) {
        const auto split = split_at(d.returns, *c.split_date);
        const auto rep = event_comparison(d.returns, pairs, split, c.hedge, c.hedge_form);
        CsvTable t("hedge_event_split");
        t.comment("split_date", c.split_date->str());
        t.row({"long", "short", "hr_before", "he_before", "hr_after", "he_after", "hr_full", "he_full"});
        for (std::size_t k = 0; k < pairs.size(); ++k)
            t.row({rep.full[k].long_id, rep.full[k].short_id, fmt(rep.before[k].hr_mean), fmt(rep.before[k].he),
                   fmt(rep.after[k].hr_mean), fmt(rep.after[k].he), fmt(rep.full[k].hr_mean), fmt(rep.full[k].he)});
        out.write("hedge/event_split.csv", t.str());
        s["split_date"] = c.split_date->str();
    }
    notes.stages["hedge"] = s;
}

enum class Command { describe, test, var, tvp, qvar, rolling, hedge, report, simulate };

inline std::string to_string(Command c) {
    switch (c) {
        case Command::describe: return "describe";
        case Command::test: return "test";
        case Command::var: return "var";
        case Command::tvp: return "tvp";
        case Command::qvar: return "qvar";
        case Command::rolling: return "rolling";
        case Command::hedge: return "hedge";
        case Command::report: return "report";
        case Command::simulate: return "simulate";
    }
    return "unknown";
}

/// Runs one subcommand and writes its artifacts plus `manifest.json`.
/// `settings` is echoed into the manifest.
inline std::vector<std::string> run_command(Command cmd, const RunConfig& c, const KeyValues& settings) {
    OutputTree out(c.output_dir);
    RunNotes notes;
    if (cmd == Command::simulate) {
        if (c.source != DataSource::synthetic) throw InvalidInput("simulate needs data.source = synthetic");
        const auto levels = synthetic_levels(c);
        out.write("prices.csv", levels_csv(levels));
        out.write("meta.csv", meta_csv(levels.meta()));
        notes.stages["simulate"] = {{"scenario", synth::to_string(c.scenario)}, {"rows", levels.length()}};
    } else {
        const auto data = load_data(c);
        if (c.split_date) (void)split_at(data.returns, *c.split_date);
        const bool all = cmd == Command::report;
        if (all || cmd == Command::describe) stage_describe(c, data, out, notes);
        if (all || cmd == Command::test) stage_test(c, data, out, notes);
        if (all || cmd == Command::var) stage_var(c, data, out, notes);
        if (all || cmd == Command::tvp) stage_tvp(c, data, out, notes);
        if (all || cmd == Command::qvar) stage_qvar(c, data, out, notes);
        if (all || cmd == Command::rolling) stage_rolling(c, data, out, notes);
        if (all || cmd == Command::hedge) stage_hedge(c, data, out, notes);
    }
    nlohmann::ordered_json m;
    m["status"] = "ok";
    m["command"] = to_string(cmd);
    m["settings"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : settings) m["settings"][k] = v;
    m["stages"] = notes.stages;
    m["warnings"] = notes.warnings;
    m["files"] = out.files();
    out.write("manifest.json", json_text(m));
    return out.files();
}

/// Machine-readable failure record.
inline std::string error_json(const std::string& command, const std::string& kind, const std::string& message,
                              const std::vector<ConfigIssue>& issues = {}) {
    nlohmann::ordered_json j;
    j["status"] = "error";
    j["command"] = command;
    j["kind"] = kind;
    j["message"] = message;
    j["errors"] = nlohmann::ordered_json::array();
    for (const auto& i : issues) j["errors"].push_back({{"key", i.key}, {"message", i.message}});
    return json_text(j);
}

}  // namespace spillover
