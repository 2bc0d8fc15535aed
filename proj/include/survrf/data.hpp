#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "survrf/factor_split.hpp"
#include "survrf/rng.hpp"
#include "survrf/util.hpp"

namespace survrf {

/// One observation: observed time, event indicator (1 = event, 0 = censored)
/// and one factor label index per variable.
struct SurvivalRecord {
    double time = 0.0;
    std::uint8_t status = 0;
    std::vector<std::uint32_t> features;
};

struct FactorVariable {
    std::string name;
    std::vector<std::string> labels;  // empty while a numeric column awaits discretization
    std::vector<double> cut_points;   // interior cuts when discretized from a numeric column

    bool pending() const { return labels.empty(); }
    bool degenerate() const { return labels.size() == 1; }
    std::uint32_t label_count() const { return static_cast<std::uint32_t>(labels.size()); }
};

struct FactorSchema {
    std::vector<FactorVariable> variables;

    std::size_t size() const { return variables.size(); }

    std::size_t index_of(std::string_view name) const {
        for (std::size_t j = 0; j < variables.size(); ++j)
            if (variables[j].name == name) return j;
        fail("unknown variable: " + std::string(name));
    }

    std::vector<std::uint32_t> label_counts() const {
        std::vector<std::uint32_t> out;
        out.reserve(variables.size());
        for (const auto& v : variables) out.push_back(v.label_count());
        return out;
    }

    bool operator==(const FactorSchema&) const = default;
};

inline bool operator==(const FactorVariable& a, const FactorVariable& b) {
    return a.name == b.name && a.labels == b.labels && a.cut_points == b.cut_points;
}

inline std::uint64_t max_root_splits(const FactorSchema& schema) {
    std::vector<std::uint32_t> counts;
    counts.reserve(schema.size());
    for (const auto& v : schema.variables) {
        require(!v.pending(), "schema still has columns awaiting discretization");
        if (v.label_count() >= 2) counts.push_back(v.label_count());
    }
    require(!counts.empty(), "schema has no splittable factor");
    return max_root_splits(std::span<const std::uint32_t>{counts});
}

/// Columnar survival dataset. Immutable once built: every transformation
/// returns a new Dataset, so instances are safe to share across threads.
class Dataset {
public:
    Dataset() = default;

    Dataset(FactorSchema schema, std::vector<double> times, std::vector<std::uint8_t> statuses,
            std::vector<std::vector<std::uint32_t>> codes, std::vector<std::vector<double>> raw)
        : schema_(std::move(schema)),
          times_(std::move(times)),
          statuses_(std::move(statuses)),
          codes_(std::move(codes)),
          raw_(std::move(raw)) {
        validate();
    }

    const FactorSchema& schema() const { return schema_; }
    std::size_t n_cases() const { return times_.size(); }
    std::size_t n_variables() const { return schema_.size(); }

    double time(std::size_t i) const { return times_[i]; }
    std::uint8_t status(std::size_t i) const { return statuses_[i]; }
    std::span<const double> times() const { return times_; }
    std::span<const std::uint8_t> statuses() const { return statuses_; }

    std::uint32_t code(std::size_t var, std::size_t i) const { return codes_[var][i]; }
    std::span<const std::uint32_t> codes(std::size_t var) const { return codes_[var]; }
    std::span<const double> raw_values(std::size_t var) const { return raw_[var]; }

    std::size_t n_events() const {
        std::size_t n = 0;
        for (auto s : statuses_) n += s;
        return n;
    }

    bool has_pending() const {
        for (const auto& v : schema_.variables)
            if (v.pending()) return true;
        return false;
    }

    std::vector<std::size_t> pending_variables() const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < schema_.size(); ++j)
            if (schema_.variables[j].pending()) out.push_back(j);
        return out;
    }

    SurvivalRecord record(std::size_t i) const {
        require(!has_pending(), "dataset still has columns awaiting discretization");
        SurvivalRecord r;
        r.time = times_[i];
        r.status = statuses_[i];
        r.features.reserve(schema_.size());
        for (std::size_t j = 0; j < schema_.size(); ++j) r.features.push_back(codes_[j][i]);
        return r;
    }

    /// Distinct observed event times, ascending.
    std::vector<double> distinct_event_times() const {
        std::vector<double> t;
        for (std::size_t i = 0; i < times_.size(); ++i)
            if (statuses_[i]) t.push_back(times_[i]);
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        return t;
    }

    // internal builders used by the transformation functions below
    std::vector<double>& mutable_times() { return times_; }
    std::vector<std::uint8_t>& mutable_statuses() { return statuses_; }
    std::vector<std::vector<std::uint32_t>>& mutable_codes() { return codes_; }
    std::vector<std::vector<double>>& mutable_raw() { return raw_; }
    FactorSchema& mutable_schema() { return schema_; }

    void validate() const {
        require(schema_.size() == codes_.size() && schema_.size() == raw_.size(),
                "schema/column count mismatch");
        for (std::size_t j = 0; j < schema_.size(); ++j) {
            const auto& v = schema_.variables[j];
            if (v.pending()) {
                require(raw_[j].size() == times_.size(), "raw column length mismatch");
            } else {
                require(codes_[j].size() == times_.size(), "code column length mismatch");
                for (auto c : codes_[j])
                    require(c < v.label_count(), "label index out of range in column " + v.name);
            }
        }
        require(statuses_.size() == times_.size(), "status column length mismatch");
        for (double t : times_) require(t >= 0.0, "negative time");
        for (auto s : statuses_) require(s <= 1, "status outside {0,1}");
    }

private:
    FactorSchema schema_;
    std::vector<double> times_;
    std::vector<std::uint8_t> statuses_;
    std::vector<std::vector<std::uint32_t>> codes_;  // per variable, per case
    std::vector<std::vector<double>> raw_;           // per variable, only while pending
};

struct LoadOptions {
    /// Numeric columns with at most this many distinct values load directly
    /// as factors (labels ordered by value); wider numeric columns are tagged
    /// pending and must be discretized before fitting.
    std::size_t max_numeric_factor_levels = 10;
    /// When set, label mappings and pending/factor decisions come from this
    /// schema instead of being inferred (the sidecar flow for test data).
    const FactorSchema* schema = nullptr;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline Dataset load_csv_stream(std::istream& in, std::string_view time_col,
                               std::string_view status_col, const LoadOptions& opts = {},
                               std::string_view origin = "<stream>") {
    std::string where(origin);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), where + ": empty file");
    std::vector<std::string> header = detail::split_csv_line(line);

    std::ptrdiff_t time_idx = -1, status_idx = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == time_col) time_idx = static_cast<std::ptrdiff_t>(c);
        if (header[c] == status_col) status_idx = static_cast<std::ptrdiff_t>(c);
    }
    require(time_idx >= 0, where + ": missing time column '" + std::string(time_col) + "'");
    require(status_idx >= 0, where + ": missing status column '" + std::string(status_col) + "'");

    std::vector<std::string> feature_names;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (static_cast<std::ptrdiff_t>(c) == time_idx ||
            static_cast<std::ptrdiff_t>(c) == status_idx)
            continue;
        feature_names.push_back(header[c]);
        feature_cols.push_back(c);
    }

    std::vector<double> times;
    std::vector<std::uint8_t> statuses;
    std::vector<std::vector<std::string>> cells(feature_cols.size());

    std::size_t row = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        require(fields.size() == header.size(),
                where + " row " + std::to_string(row) + ": expected " +
                    std::to_string(header.size()) + " fields, got " +
                    std::to_string(fields.size()));
        double t;
        require(parse_double(fields[static_cast<std::size_t>(time_idx)], t) && t >= 0.0,
                where + " row " + std::to_string(row) + ": unparseable or negative time '" +
                    fields[static_cast<std::size_t>(time_idx)] + "'");
        double s;
        require(parse_double(fields[static_cast<std::size_t>(status_idx)], s) &&
                    (s == 0.0 || s == 1.0),
                where + " row " + std::to_string(row) + ": status must be 0 or 1, got '" +
                    fields[static_cast<std::size_t>(status_idx)] + "'");
        times.push_back(t);
        statuses.push_back(static_cast<std::uint8_t>(s));
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            const std::string& cell = fields[feature_cols[f]];
            require(!cell.empty(),
                    where + " row " + std::to_string(row) + ": missing value in column '" +
                        feature_names[f] + "'");
            cells[f].push_back(cell);
        }
    }
    require(!times.empty(), where + ": no data rows");

    FactorSchema schema;
    std::vector<std::vector<std::uint32_t>> codes;
    std::vector<std::vector<double>> raw;

    if (opts.schema) {
        // Sidecar flow: variables ordered and encoded exactly as the given
        // schema prescribes, so indices line up with a fitted model.
        for (const auto& fixed : opts.schema->variables) {
            std::size_t f = feature_names.size();
            for (std::size_t k = 0; k < feature_names.size(); ++k)
                if (feature_names[k] == fixed.name) f = k;
            require(f < feature_names.size(),
                    where + ": missing column '" + fixed.name + "' required by the schema");

            FactorVariable var = fixed;
            std::vector<std::uint32_t> code;
            std::vector<double> values;
            if (var.pending() || !var.cut_points.empty()) {
                values.resize(cells[f].size());
                for (std::size_t i = 0; i < cells[f].size(); ++i)
                    require(parse_double(cells[f][i], values[i]),
                            where + ": column '" + var.name + "' must be numeric");
            }
            if (var.pending()) {
                // stays pending; caller discretizes with the training rule
            } else if (!var.cut_points.empty()) {
                for (double v : values) {
                    auto it = std::lower_bound(var.cut_points.begin(), var.cut_points.end(), v);
                    code.push_back(static_cast<std::uint32_t>(it - var.cut_points.begin()));
                }
                values.clear();
            } else {
                std::unordered_map<std::string, std::uint32_t> lookup;
                for (std::uint32_t k = 0; k < var.label_count(); ++k) lookup[var.labels[k]] = k;
                for (std::size_t i = 0; i < cells[f].size(); ++i) {
                    auto it = lookup.find(cells[f][i]);
                    require(it != lookup.end(), where + ": unknown label '" + cells[f][i] +
                                                    "' in column '" + var.name + "'");
                    code.push_back(it->second);
                }
            }
            schema.variables.push_back(std::move(var));
            codes.push_back(std::move(code));
            raw.push_back(std::move(values));
        }
        return Dataset(std::move(schema), std::move(times), std::move(statuses), std::move(codes),
                       std::move(raw));
    }

    codes.resize(feature_cols.size());
    raw.resize(feature_cols.size());
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        FactorVariable var;
        var.name = feature_names[f];

        std::vector<double> numeric(cells[f].size());
        bool all_numeric = true;
        for (std::size_t i = 0; i < cells[f].size(); ++i) {
            if (!parse_double(cells[f][i], numeric[i])) {
                all_numeric = false;
                break;
            }
        }

        if (all_numeric) {
            std::vector<double> distinct = numeric;
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            if (distinct.size() <= opts.max_numeric_factor_levels) {
                // low-cardinality numeric column: a factor with value-ordered labels
                for (double v : distinct) var.labels.push_back(format_double(v));
                for (double v : numeric) {
                    std::size_t k = static_cast<std::size_t>(
                        std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin());
                    codes[f].push_back(static_cast<std::uint32_t>(k));
                }
            } else {
                raw[f] = std::move(numeric);  // pending discretization
            }
        } else {
            // string column: labels in first-appearance order
            std::unordered_map<std::string, std::uint32_t> lookup;
            for (std::size_t i = 0; i < cells[f].size(); ++i) {
                auto [it, inserted] =
                    lookup.try_emplace(cells[f][i], static_cast<std::uint32_t>(var.labels.size()));
                if (inserted) var.labels.push_back(cells[f][i]);
                codes[f].push_back(it->second);
            }
        }
        schema.variables.push_back(std::move(var));
    }

    return Dataset(std::move(schema), std::move(times), std::move(statuses), std::move(codes),
                   std::move(raw));
}

inline Dataset load_csv(const std::string& path, std::string_view time_col,
                        std::string_view status_col, const LoadOptions& opts = {}) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path);
    return load_csv_stream(in, time_col, status_col, opts, path);
}

/// Equal-frequency discretization of a pending numeric column into at most L
/// labels. Cut points sit at the k/L order statistics; cuts collapsed by ties
/// or by hitting the maximum leave every realized bin non-empty. A single
/// realized label marks the variable degenerate.
inline Dataset discretize(const Dataset& ds, std::string_view variable, std::uint32_t L) {
    require(L >= 2, "discretize needs L >= 2");
    std::size_t j = ds.schema().index_of(variable);
    require(ds.schema().variables[j].pending(),
            "variable '" + std::string(variable) + "' is already a factor");

    std::span<const double> values = ds.raw_values(j);
    const std::size_t n = values.size();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> cuts;
    for (std::uint32_t k = 1; k < L; ++k) {
        // highest value of the k-th equal-frequency block
        std::size_t idx = (n * k + L - 1) / L;  // ceil(n*k/L)
        double c = sorted[idx - 1];
        if (c >= sorted.back()) continue;       // would leave the top bin empty
        if (!cuts.empty() && c <= cuts.back()) continue;  // tie collapsed
        cuts.push_back(c);
    }

    FactorVariable var;
    var.name = ds.schema().variables[j].name;
    var.cut_points = cuts;
    for (std::size_t b = 0; b <= cuts.size(); ++b) {
        double lo = b == 0 ? -std::numeric_limits<double>::infinity() : cuts[b - 1];
        double hi = b == cuts.size() ? std::numeric_limits<double>::infinity() : cuts[b];
        std::string name = b == 0 ? "(-inf," : "(" + format_double(lo) + ",";
        name += b == cuts.size() ? "inf)" : format_double(hi) + "]";
        var.labels.push_back(name);
    }

    std::vector<std::uint32_t> code(n);
    for (std::size_t i = 0; i < n; ++i) {
        // bin index = number of cuts strictly below the value, so v <= c1 is bin 0
        auto it = std::lower_bound(cuts.begin(), cuts.end(), values[i]);
        code[i] = static_cast<std::uint32_t>(it - cuts.begin());
    }

    Dataset out = ds;
    out.mutable_schema().variables[j] = std::move(var);
    out.mutable_codes()[j] = std::move(code);
    out.mutable_raw()[j].clear();
    return out;
}

/// Discretizes every pending numeric column to at most L labels.
inline Dataset discretize_all(Dataset ds, std::uint32_t L) {
    for (std::size_t j : ds.pending_variables())
        ds = discretize(ds, ds.schema().variables[j].name, L);
    return ds;
}

/// Appends noise variables: n_continuous standard-normal columns discretized
/// to at most L_continuous labels (names prefixed "c") and n_discrete fair
/// binary factors (names prefixed "d"). Times and statuses are untouched.
inline Dataset inject_noise(const Dataset& ds, std::size_t n_continuous, std::size_t n_discrete,
                            std::uint32_t L_continuous, Rng& rng) {
    require(ds.n_cases() > 0, "cannot inject noise into an empty dataset");
    Dataset out = ds;
    const std::size_t n = ds.n_cases();

    for (std::size_t k = 0; k < n_continuous; ++k) {
        std::vector<double> values(n);
        for (auto& v : values) v = rng.normal();
        FactorVariable var;
        var.name = "c" + std::to_string(k + 1);
        out.mutable_schema().variables.push_back(var);  // pending
        out.mutable_codes().emplace_back();
        out.mutable_raw().push_back(std::move(values));
        out = discretize(out, out.schema().variables.back().name, L_continuous);
    }

    for (std::size_t k = 0; k < n_discrete; ++k) {
        std::vector<std::uint32_t> code(n);
        for (auto& c : code) c = rng.bernoulli_half() ? 1u : 0u;
        FactorVariable var;
        var.name = "d" + std::to_string(k + 1);
        var.labels = {"0", "1"};
        out.mutable_schema().variables.push_back(std::move(var));
        out.mutable_codes().push_back(std::move(code));
        out.mutable_raw().emplace_back();
    }

    out.validate();
    return out;
}

inline void write_csv_stream(const Dataset& ds, std::ostream& out, std::string_view time_col,
                             std::string_view status_col) {
    out << time_col << "," << status_col;
    for (const auto& v : ds.schema().variables) out << "," << v.name;
    out << "\n";
    for (std::size_t i = 0; i < ds.n_cases(); ++i) {
        out << format_double(ds.time(i)) << "," << int(ds.status(i));
        for (std::size_t j = 0; j < ds.n_variables(); ++j) {
            const auto& var = ds.schema().variables[j];
            if (var.pending())
                out << "," << format_double(ds.raw_values(j)[i]);
            else
                out << "," << var.labels[ds.code(j, i)];
        }
        out << "\n";
    }
}

inline void write_csv(const Dataset& ds, const std::string& path, std::string_view time_col,
                      std::string_view status_col) {
    std::ofstream out(path);
    require(out.good(), "cannot write " + path);
    write_csv_stream(ds, out, time_col, status_col);
}

}  // namespace survrf
