#pragma once

// Date-aligned multi-series panels: loading, differencing, slicing.

#include "spillover/common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace spillover {

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

/// ISO-8601 calendar date used as an ordered label. No calendar arithmetic.
class Date {
public:
    Date() = default;
    Date(int y, unsigned m, unsigned d)
        : ymd_{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}} {
        if (!ymd_.ok()) throw InvalidInput("invalid calendar date");
    }

    static Date parse(std::string_view s) {
        auto fail = [&] { return InvalidInput("unparseable date '" + std::string(s) + "'"); };
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw fail();
        int y = 0;
        unsigned m = 0, d = 0;
        auto num = [&](std::string_view part, auto& out) {
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
            if (ec != std::errc{} || p != part.data() + part.size()) throw fail();
        };
        num(s.substr(0, 4), y);
        num(s.substr(5, 2), m);
        num(s.substr(8, 2), d);
        Date out;
        out.ymd_ = std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                               std::chrono::day{d}};
        if (!out.ymd_.ok()) throw fail();
        return out;
    }

    [[nodiscard]] std::chrono::sys_days days() const { return std::chrono::sys_days{ymd_}; }
    static Date from_days(std::chrono::sys_days d) {
        Date out;
        out.ymd_ = std::chrono::year_month_day{d};
        return out;
    }

    [[nodiscard]] std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd_.year()),
                      static_cast<unsigned>(ymd_.month()), static_cast<unsigned>(ymd_.day()));
        return buf;
    }

    friend auto operator<=>(const Date&, const Date&) = default;
    friend bool operator==(const Date&, const Date&) = default;

private:
    std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::month{1},
                                     std::chrono::day{1}};
};

/// `count` consecutive weekdays starting at (or after) `start`.
inline std::vector<Date> weekday_sequence(const Date& start, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    auto d = start.days();
    while (out.size() < count) {
        const auto wd = std::chrono::weekday{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.push_back(Date::from_days(d));
        d += std::chrono::days{1};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Series metadata
// ---------------------------------------------------------------------------

enum class Role { portfolio, investor_sentiment, energy_market, shipping_cost, other };

/// How a level series becomes a return series.
enum class Differencing { log, simple };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::portfolio: return "portfolio";
        case Role::investor_sentiment: return "investor_sentiment";
        case Role::energy_market: return "energy_market";
        case Role::shipping_cost: return "shipping_cost";
        case Role::other: return "other";
    }
    return "other";
}

inline Role parse_role(std::string_view s) {
    if (s == "portfolio") return Role::portfolio;
    if (s == "investor_sentiment") return Role::investor_sentiment;
    if (s == "energy_market") return Role::energy_market;
    if (s == "shipping_cost") return Role::shipping_cost;
    if (s == "other" || s.empty()) return Role::other;
    throw InvalidInput("unknown series role '" + std::string(s) + "'");
}

inline std::string to_string(Differencing d) { return d == Differencing::log ? "log" : "simple"; }

struct SeriesMeta {
    std::string id;
    Role role = Role::other;
    std::optional<double> esg_score;
    Differencing differencing = Differencing::log;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Reads non-blank, non-comment lines.
inline std::vector<std::string> read_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        lines.emplace_back(t);
    }
    return lines;
}

inline std::optional<double> parse_cell(std::string_view s, std::size_t line_no) {
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") return std::nullopt;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
        throw InvalidInput("unparseable value '" + std::string(s) + "' on line " +
                           std::to_string(line_no));
    }
    return v;
}

inline void check_unique_ids(const std::vector<SeriesMeta>& meta) {
    std::unordered_set<std::string> seen;
    for (const auto& m : meta) {
        if (m.id.empty()) throw InvalidInput("series id must be nonempty");
        if (!seen.insert(m.id).second) throw InvalidInput("duplicate series id '" + m.id + "'");
        if (m.esg_score && *m.esg_score < 0.0) throw InvalidInput("negative esg score for " + m.id);
    }
}

}  // namespace detail

/// Reads the metadata sidecar: `id,role,esg_score[,differencing]`, header required.
inline std::vector<SeriesMeta> load_meta(std::istream& in) {
    auto lines = detail::read_lines(in);
    if (lines.empty()) throw InvalidInput("empty metadata file");
    std::vector<SeriesMeta> out;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        auto f = detail::split_csv_line(lines[k]);
        if (f.size() < 2) throw InvalidInput("metadata line " + std::to_string(k + 1) + " too short");
        SeriesMeta m;
        m.id = f[0];
        m.role = parse_role(f[1]);
        if (f.size() > 2 && !f[2].empty()) m.esg_score = detail::parse_cell(f[2], k + 1);
        if (f.size() > 3 && !f[3].empty()) {
            if (f[3] == "log") m.differencing = Differencing::log;
            else if (f[3] == "simple" || f[3] == "level") m.differencing = Differencing::simple;
            else throw InvalidInput("unknown differencing '" + f[3] + "'");
        }
        out.push_back(std::move(m));
    }
    detail::check_unique_ids(out);
    return out;
}

// ---------------------------------------------------------------------------
// Panels
// ---------------------------------------------------------------------------

/// T x N level panel. Immutable once built.
class TimeSeriesPanel {
public:
    TimeSeriesPanel(std::vector<Date> dates, Matrix values, std::vector<SeriesMeta> meta)
        : dates_(std::move(dates)), values_(std::move(values)), meta_(std::move(meta)) {
        if (dates_.size() < 2) throw InvalidInput("panel needs at least two dates");
        if (static_cast<std::size_t>(values_.rows()) != dates_.size())
            throw InvalidInput("row count does not match date count");
        if (static_cast<std::size_t>(values_.cols()) != meta_.size())
            throw InvalidInput("column count does not match metadata count");
        if (!values_.allFinite()) throw InvalidInput("panel contains missing or non-finite cells");
        for (std::size_t t = 1; t < dates_.size(); ++t)
            if (!(dates_[t - 1] < dates_[t])) throw InvalidInput("dates must be strictly increasing");
        detail::check_unique_ids(meta_);
    }

    [[nodiscard]] const std::vector<Date>& dates() const noexcept { return dates_; }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<SeriesMeta>& meta() const noexcept { return meta_; }
    [[nodiscard]] std::size_t length() const noexcept { return dates_.size(); }
    [[nodiscard]] std::size_t width() const noexcept { return meta_.size(); }

private:
    std::vector<Date> dates_;
    Matrix values_;
    std::vector<SeriesMeta> meta_;
};

/// (T-1) x N panel of first differences (log or simple per series).
class ReturnsPanel {
public:
    ReturnsPanel(std::vector<Date> dates, Matrix values, std::vector<SeriesMeta> meta)
        : dates_(std::move(dates)), values_(std::move(values)), meta_(std::move(meta)) {
        if (static_cast<std::size_t>(values_.rows()) != dates_.size())
            throw InvalidInput("row count does not match date count");
        if (static_cast<std::size_t>(values_.cols()) != meta_.size())
            throw InvalidInput("column count does not match metadata count");
        if (!values_.allFinite()) throw InvalidInput("returns contain non-finite values");
        for (std::size_t t = 1; t < dates_.size(); ++t)
            if (!(dates_[t - 1] < dates_[t])) throw InvalidInput("dates must be strictly increasing");
        detail::check_unique_ids(meta_);
    }

    [[nodiscard]] const std::vector<Date>& dates() const noexcept { return dates_; }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<SeriesMeta>& meta() const noexcept { return meta_; }
    [[nodiscard]] std::size_t length() const noexcept { return dates_.size(); }
    [[nodiscard]] std::size_t width() const noexcept { return meta_.size(); }

    [[nodiscard]] std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& m : meta_) out.push_back(m.id);
        return out;
    }

    [[nodiscard]] std::size_t index_of(std::string_view id) const {
        for (std::size_t i = 0; i < meta_.size(); ++i)
            if (meta_[i].id == id) return i;
        throw InvalidInput("unknown series '" + std::string(id) + "'");
    }

    [[nodiscard]] Vector column(std::size_t i) const { return values_.col(static_cast<Eigen::Index>(i)); }

    /// Rows [begin, end).
    [[nodiscard]] ReturnsPanel slice(std::size_t begin, std::size_t end) const {
        if (begin > end || end > length()) throw InvalidInput("slice out of range");
        std::vector<Date> d(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                            dates_.begin() + static_cast<std::ptrdiff_t>(end));
        Matrix v = values_.middleRows(static_cast<Eigen::Index>(begin),
                                      static_cast<Eigen::Index>(end - begin));
        return ReturnsPanel(std::move(d), std::move(v), meta_);
    }

    /// Keeps only the named columns, in the given order.
    [[nodiscard]] ReturnsPanel select(const std::vector<std::string>& ids) const {
        Matrix v(values_.rows(), static_cast<Eigen::Index>(ids.size()));
        std::vector<SeriesMeta> m;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            auto i = index_of(ids[k]);
            v.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(i));
            m.push_back(meta_[i]);
        }
        return ReturnsPanel(dates_, std::move(v), std::move(m));
    }

private:
    std::vector<Date> dates_;
    Matrix values_;
    std::vector<SeriesMeta> meta_;
};

enum class Schema { wide, long_format };

/// Parses a comma-separated panel. Dates absent from any series are dropped
/// (inner join); rows may appear in any order.
///
/// `meta` fixes column order and per-series differencing; ids present in the
/// data but missing from `meta` are appended with default metadata.
inline TimeSeriesPanel load_panel(std::istream& in, Schema schema,
                                  const std::vector<SeriesMeta>& meta = {}) {
    auto lines = detail::read_lines(in);
    if (lines.size() < 2) throw InvalidInput("panel file has no data rows");

    std::vector<std::string> ids;  // order of discovery (wide: header order)
    std::map<Date, std::unordered_map<std::string, double>> cells;
    std::map<Date, std::unordered_set<std::string>> missing;

    auto header = detail::split_csv_line(lines[0]);
    if (schema == Schema::wide) {
        if (header.size() < 2) throw InvalidInput("wide header needs a date column and at least one series");
        ids.assign(header.begin() + 1, header.end());
        std::set<std::string> seen;
        for (const auto& id : ids)
            if (id.empty() || !seen.insert(id).second) throw InvalidInput("bad or duplicate column '" + id + "'");
        for (std::size_t k = 1; k < lines.size(); ++k) {
            auto f = detail::split_csv_line(lines[k]);
            if (f.size() != header.size())
                throw InvalidInput("line " + std::to_string(k + 1) + " has wrong field count");
            auto date = Date::parse(f[0]);
            if (cells.contains(date) || missing.contains(date))
                throw InvalidInput("duplicate observation for date " + date.str());
            auto& row = cells[date];
            for (std::size_t j = 0; j < ids.size(); ++j) {
                if (auto v = detail::parse_cell(f[j + 1], k + 1)) row[ids[j]] = *v;
                else missing[date].insert(ids[j]);
            }
        }
    } else {
        if (header.size() != 3) throw InvalidInput("long header must be date,id,value");
        std::set<std::string> seen;
        for (std::size_t k = 1; k < lines.size(); ++k) {
            auto f = detail::split_csv_line(lines[k]);
            if (f.size() != 3) throw InvalidInput("line " + std::to_string(k + 1) + " has wrong field count");
            auto date = Date::parse(f[0]);
            if (f[1].empty()) throw InvalidInput("empty series id on line " + std::to_string(k + 1));
            auto v = detail::parse_cell(f[2], k + 1);
            if (!v) continue;
            auto& row = cells[date];
            if (!row.emplace(f[1], *v).second)
                throw InvalidInput("duplicate observation (" + date.str() + "," + f[1] + ")");
            seen.insert(f[1]);
        }
        ids.assign(seen.begin(), seen.end());  // sorted: independent of row order
    }

    std::vector<SeriesMeta> ordered;
    std::unordered_set<std::string> id_set(ids.begin(), ids.end());
    for (const auto& m : meta) {
        if (!id_set.contains(m.id)) throw InvalidInput("metadata names unknown series '" + m.id + "'");
        ordered.push_back(m);
    }
    for (const auto& id : ids) {
        bool known = std::any_of(meta.begin(), meta.end(), [&](const SeriesMeta& m) { return m.id == id; });
        if (!known) ordered.push_back(SeriesMeta{id});
    }
    detail::check_unique_ids(ordered);

    std::vector<Date> dates;
    for (const auto& [date, row] : cells) {
        bool complete = std::all_of(ordered.begin(), ordered.end(),
                                    [&](const SeriesMeta& m) { return row.contains(m.id); });
        if (complete) dates.push_back(date);
    }
    if (dates.empty()) throw InvalidInput("no date is common to all series");
    if (dates.size() < 2) throw InvalidInput("fewer than two common dates");

    Matrix values(static_cast<Eigen::Index>(dates.size()), static_cast<Eigen::Index>(ordered.size()));
    for (std::size_t t = 0; t < dates.size(); ++t) {
        const auto& row = cells.at(dates[t]);
        for (std::size_t j = 0; j < ordered.size(); ++j) {
            double v = row.at(ordered[j].id);
            if (ordered[j].differencing == Differencing::log && !(v > 0.0))
                throw InvalidInput("nonpositive price " + std::to_string(v) + " for log-differenced series '" +
                                   ordered[j].id + "' on " + dates[t].str());
            values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return TimeSeriesPanel(std::move(dates), std::move(values), std::move(ordered));
}

/// First differences: ln(C_t) - ln(C_{t-1}) for log series, C_t - C_{t-1} otherwise.
inline ReturnsPanel log_returns(const TimeSeriesPanel& panel) {
    const auto& v = panel.values();
    const Eigen::Index T = v.rows();
    Matrix r(T - 1, v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const bool use_log = panel.meta()[static_cast<std::size_t>(j)].differencing == Differencing::log;
        for (Eigen::Index t = 0; t + 1 < T; ++t) {
            if (use_log) {
                if (!(v(t, j) > 0.0) || !(v(t + 1, j) > 0.0))
                    throw InvalidInput("nonpositive value in log-differenced series '" +
                                       panel.meta()[static_cast<std::size_t>(j)].id + "'");
                r(t, j) = std::log(v(t + 1, j)) - std::log(v(t, j));
            } else {
                r(t, j) = v(t + 1, j) - v(t, j);
            }
        }
    }
    std::vector<Date> dates(panel.dates().begin() + 1, panel.dates().end());
    return ReturnsPanel(std::move(dates), std::move(r), panel.meta());
}

struct EventSplit {
    Date split_date;
    ReturnsPanel before;
    ReturnsPanel after;
};

/// Splits at row `index`: before = [0, index), after = [index, T).
inline EventSplit split_at_index(const ReturnsPanel& returns, std::size_t index, std::size_t min_length = 1) {
    if (index == 0) throw InvalidInput("split leaves an empty 'before' half");
    if (index >= returns.length()) throw InvalidInput("split leaves an empty 'after' half");
    if (index < min_length || returns.length() - index < min_length)
        throw InvalidInput("split half shorter than the minimum length " + std::to_string(min_length));
    return EventSplit{returns.dates()[index], returns.slice(0, index), returns.slice(index, returns.length())};
}

/// Splits so that every `before` date is < `date` <= the first `after` date.
inline EventSplit split_at(const ReturnsPanel& returns, const Date& date, std::size_t min_length = 1) {
    const auto& d = returns.dates();
    if (d.empty() || date <= d.front() || date > d.back())
        throw InvalidInput("split date " + date.str() + " is not strictly inside the panel's date range");
    auto it = std::lower_bound(d.begin(), d.end(), date);
    auto split = split_at_index(returns, static_cast<std::size_t>(it - d.begin()), min_length);
    split.split_date = date;
    return split;
}

/// Writes a wide CSV (`date,ID1,...`) with full round-trip precision.
inline void write_wide_csv(std::ostream& out, const std::vector<Date>& dates, const Matrix& values,
                           const std::vector<SeriesMeta>& meta) {
    out << "date";
    for (const auto& m : meta) out << ',' << m.id;
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < dates.size(); ++t) {
        out << dates[t].str();
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", values(static_cast<Eigen::Index>(t), j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace spillover
