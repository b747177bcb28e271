#include "fcox/data_io.hpp"

#include "fcox/error.hpp"
#include "fcox/format.hpp"
#include "fcox/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fcox {

using nlohmann::json;

// ---- schema -------------------------------------------------------------

void DatasetSchema::validate() const {
    if (time_column.empty()) throw ConfigError("schema: time_column is required");
    if (event_column.empty()) throw ConfigError("schema: event_column is required");
    if (event_true_values.empty()) throw ConfigError("schema: event_true_values is empty");
    std::set<std::string> names;
    for (const auto& f : features) {
        if (f.name.empty()) throw ConfigError("schema: feature without a name");
        if (f.name == time_column || f.name == event_column)
            throw ConfigError("schema: time/event column '" + f.name + "' listed as a feature");
        if (!names.insert(f.name).second)
            throw ConfigError("schema: duplicate feature '" + f.name + "'");
    }
    std::set<std::string> prot;
    for (const auto& p : protected_attributes) {
        if (p.name.empty() || p.column.empty())
            throw ConfigError("schema: protected attribute needs name and column");
        if (!prot.insert(p.name).second)
            throw ConfigError("schema: duplicate protected attribute '" + p.name + "'");
        if (p.threshold.has_value() == !p.coding.empty())
            throw ConfigError("schema: protected attribute '" + p.name +
                              "' needs exactly one of coding or threshold");
        std::set<int> codes;
        for (const auto& [raw, code] : p.coding)
            if (!codes.insert(code).second)
                throw ConfigError("schema: coding of '" + p.name + "' is not one-to-one");
        if (include_protected_as_features && names.count(p.name))
            throw ConfigError("schema: protected attribute '" + p.name +
                              "' clashes with a feature name");
    }
    if (group_attribute && !prot.count(*group_attribute))
        throw ConfigError("schema: group_attribute '" + *group_attribute +
                          "' is not a protected attribute");
}

DatasetSchema parse_schema(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
    }
    static const std::set<std::string> known{
        "time_column",      "event_column",     "event_true_values",
        "features",         "protected",        "include_protected_as_features",
        "missing_policy",   "missing_values",   "group_attribute", "description"};
    DatasetSchema s;
    try {
        for (const auto& [key, value] : j.items())
            if (!known.count(key)) throw ConfigError("schema: unknown field '" + key + "'");
        s.time_column = j.at("time_column").get<std::string>();
        s.event_column = j.at("event_column").get<std::string>();
        if (j.contains("event_true_values"))
            s.event_true_values = j["event_true_values"].get<std::vector<std::string>>();
        for (const auto& f : j.at("features")) {
            FeatureSpec spec;
            if (f.is_string()) {
                spec.name = f.get<std::string>();
            } else {
                spec.name = f.at("name").get<std::string>();
                if (f.contains("coding")) spec.coding = f["coding"].get<std::map<std::string, double>>();
                if (f.contains("fill")) spec.fill = f["fill"].get<double>();
            }
            s.features.push_back(std::move(spec));
        }
        if (j.contains("protected")) {
            for (const auto& p : j["protected"]) {
                ProtectedSpec spec;
                spec.name = p.at("name").get<std::string>();
                spec.column = p.value("column", spec.name);
                if (p.contains("coding")) spec.coding = p["coding"].get<std::map<std::string, int>>();
                if (p.contains("threshold")) spec.threshold = p["threshold"].get<double>();
                s.protected_attributes.push_back(std::move(spec));
            }
        }
        s.include_protected_as_features = j.value("include_protected_as_features", false);
        const auto policy = j.value("missing_policy", std::string("drop_row"));
        if (policy == "drop_row")
            s.missing_policy = MissingPolicy::drop_row;
        else if (policy == "error")
            s.missing_policy = MissingPolicy::error;
        else
            throw ConfigError("schema: missing_policy must be drop_row or error");
        if (j.contains("missing_values"))
            s.missing_values = j["missing_values"].get<std::vector<std::string>>();
        if (j.contains("group_attribute")) s.group_attribute = j["group_attribute"].get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("schema: ") + e.what());
    }
    s.validate();
    return s;
}

DatasetSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str());
}

std::string schema_to_json(const DatasetSchema& s) {
    json j;
    j["time_column"] = s.time_column;
    j["event_column"] = s.event_column;
    j["event_true_values"] = s.event_true_values;
    j["features"] = json::array();
    for (const auto& f : s.features) {
        json fj{{"name", f.name}};
        if (!f.coding.empty()) fj["coding"] = f.coding;
        if (f.fill) fj["fill"] = *f.fill;
        j["features"].push_back(fj);
    }
    j["protected"] = json::array();
    for (const auto& p : s.protected_attributes) {
        json pj{{"name", p.name}, {"column", p.column}};
        if (!p.coding.empty()) pj["coding"] = p.coding;
        if (p.threshold) pj["threshold"] = *p.threshold;
        j["protected"].push_back(pj);
    }
    j["include_protected_as_features"] = s.include_protected_as_features;
    j["missing_policy"] = s.missing_policy == MissingPolicy::drop_row ? "drop_row" : "error";
    j["missing_values"] = s.missing_values;
    if (s.group_attribute) j["group_attribute"] = *s.group_attribute;
    return j.dump(2) + "\n";
}

// ---- CSV ----------------------------------------------------------------

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;      // inside a quoted field
    bool field_started = false;
    std::size_t line = 1;
    char c;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started || !field.empty())
                    throw DataError("CSV line " + std::to_string(line) + ": stray quote");
                quoted = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r':
                if (in.peek() == '\n') in.get(c);
                [[fallthrough]];
            case '\n':
                ++line;
                end_record();
                break;
            default: field.push_back(c);
        }
    }
    if (quoted) throw DataError("CSV: unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();

    CsvTable t;
    if (records.empty()) throw DataError("CSV has no header row");
    t.header = std::move(records.front());
    if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size())
            throw DataError("CSV record " + std::to_string(r) + " has " +
                            std::to_string(records[r].size()) + " fields, header has " +
                            std::to_string(t.header.size()));
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
    return parse_csv(in);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// ---- loading ------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string threshold_label(bool above, double threshold) {
    return (above ? ">" : "<=") + format_number(threshold);
}

struct RowProblem {
    std::string message;
};

}  // namespace

SurvivalDataset load_table(const CsvTable& table, const DatasetSchema& schema, LoadReport* report) {
    schema.validate();
    const auto time_col = table.column(schema.time_column);
    const auto event_col = table.column(schema.event_column);
    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) feature_cols.push_back(table.column(f.name));
    std::vector<std::size_t> prot_cols;
    for (const auto& p : schema.protected_attributes) prot_cols.push_back(table.column(p.column));

    auto is_missing = [&](const std::string& v) {
        return std::find(schema.missing_values.begin(), schema.missing_values.end(), v) !=
               schema.missing_values.end();
    };

    std::vector<std::vector<double>> x_rows;
    std::vector<double> times;
    std::vector<bool> events;
    std::vector<std::vector<int>> prot_values(schema.protected_attributes.size());
    std::size_t dropped = 0;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = "data row " + std::to_string(r + 1);
        std::optional<RowProblem> problem;
        // A missing value is droppable; every other defect is always an error.
        auto missing = [&](const std::string& col) {
            if (!problem) problem = RowProblem{where + ": missing value in column '" + col + "'"};
        };

        double t = 0;
        const auto traw = trim(row[time_col]);
        if (is_missing(traw)) {
            missing(schema.time_column);
        } else if (auto v = parse_number(traw); v && *v >= 0) {
            t = *v;
        } else {
            throw DataError(where + ": invalid time '" + traw + "'");
        }

        const auto eraw = trim(row[event_col]);
        if (is_missing(eraw)) missing(schema.event_column);
        const bool event = std::find(schema.event_true_values.begin(),
                                     schema.event_true_values.end(),
                                     eraw) != schema.event_true_values.end();

        std::vector<double> x;
        for (std::size_t k = 0; k < schema.features.size(); ++k) {
            const auto& spec = schema.features[k];
            const auto raw = trim(row[feature_cols[k]]);
            if (is_missing(raw)) {
                if (spec.fill) {
                    x.push_back(*spec.fill);
                } else {
                    missing(spec.name);
                    x.push_back(0);
                }
                continue;
            }
            if (!spec.coding.empty()) {
                auto it = spec.coding.find(raw);
                if (it == spec.coding.end()) {
                    if (schema.missing_policy == MissingPolicy::error)
                        throw DataError(where + ": value '" + raw + "' of feature '" + spec.name +
                                        "' has no coding");
                    missing(spec.name);
                    x.push_back(0);
                } else {
                    x.push_back(it->second);
                }
                continue;
            }
            auto v = parse_number(raw);
            if (!v) throw DataError(where + ": non-numeric value '" + raw + "' in '" + spec.name + "'");
            x.push_back(*v);
        }

        std::vector<int> codes;
        for (std::size_t k = 0; k < schema.protected_attributes.size(); ++k) {
            const auto& spec = schema.protected_attributes[k];
            const auto raw = trim(row[prot_cols[k]]);
            if (is_missing(raw)) {
                if (schema.missing_policy == MissingPolicy::error)
                    throw DataError(where + ": missing protected value in '" + spec.column + "'");
                missing(spec.column);
                codes.push_back(0);
                continue;
            }
            if (spec.threshold) {
                auto v = parse_number(raw);
                if (!v)
                    throw DataError(where + ": non-numeric value '" + raw + "' for protected '" +
                                    spec.name + "'");
                codes.push_back(*v > *spec.threshold ? 1 : 0);
            } else {
                auto it = spec.coding.find(raw);
                if (it == spec.coding.end()) {
                    if (schema.missing_policy == MissingPolicy::error)
                        throw DataError(where + ": unmappable value '" + raw +
                                        "' for protected attribute '" + spec.name + "'");
                    missing(spec.column);
                    codes.push_back(0);
                } else {
                    codes.push_back(it->second);
                }
            }
        }

        if (problem) {
            if (schema.missing_policy == MissingPolicy::error) throw DataError(problem->message);
            ++dropped;
            continue;
        }
        x_rows.push_back(std::move(x));
        times.push_back(t);
        events.push_back(event);
        for (std::size_t k = 0; k < codes.size(); ++k) prot_values[k].push_back(codes[k]);
    }

    if (times.empty()) throw DataError("no usable rows after applying the schema");

    std::map<std::string, ProtectedColumn> prot;
    for (std::size_t k = 0; k < schema.protected_attributes.size(); ++k) {
        const auto& spec = schema.protected_attributes[k];
        ProtectedColumn col;
        col.values = std::move(prot_values[k]);
        if (spec.threshold) {
            col.codes = {0, 1};
            col.labels = {threshold_label(false, *spec.threshold),
                          threshold_label(true, *spec.threshold)};
        } else {
            std::map<int, std::string> by_code;
            for (const auto& [raw, code] : spec.coding) by_code[code] = raw;
            for (const auto& [code, raw] : by_code) {
                col.codes.push_back(code);
                col.labels.push_back(raw);
            }
        }
        prot.emplace(spec.name, std::move(col));
    }

    std::vector<std::string> names;
    for (const auto& f : schema.features) names.push_back(f.name);
    const std::size_t n = times.size();
    std::size_t p = schema.features.size();
    if (schema.include_protected_as_features) p += schema.protected_attributes.size();
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < schema.features.size(); ++k)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x_rows[i][k];
    if (schema.include_protected_as_features) {
        for (std::size_t k = 0; k < schema.protected_attributes.size(); ++k) {
            const auto& name = schema.protected_attributes[k].name;
            names.push_back(name);
            const auto& vals = prot.at(name).values;
            for (std::size_t i = 0; i < n; ++i)
                X(static_cast<Eigen::Index>(i),
                  static_cast<Eigen::Index>(schema.features.size() + k)) = vals[i];
        }
    }

    if (report) {
        report->rows_read = table.rows.size();
        report->rows_dropped = dropped;
    }
    Vector tv = Eigen::Map<const Vector>(times.data(), static_cast<Eigen::Index>(n));
    return SurvivalDataset(std::move(X), std::move(tv), std::move(events), std::move(prot),
                           std::move(names));
}

SurvivalDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema,
                         LoadReport* report) {
    return load_table(read_csv(path), schema, report);
}

// ---- synthetic data -----------------------------------------------------

void SyntheticSpec::validate() const {
    if (n < 2) throw InvalidArgument("synthetic n must be >= 2");
    if (beta_true.empty()) throw InvalidArgument("synthetic beta_true must be nonempty");
    if (!(censoring_rate_target >= 0 && censoring_rate_target < 1))
        throw InvalidArgument("censoring_rate_target must lie in [0, 1)");
    for (const auto& [code, mult] : group_bias) {
        if (code != 0 && code != 1) throw InvalidArgument("group_bias codes must be 0 or 1");
        if (!(mult > 0)) throw InvalidArgument("group_bias multipliers must be positive");
    }
}

SurvivalDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.beta_true.size());
    const Vector beta = Eigen::Map<const Vector>(spec.beta_true.data(), p);

    Matrix X(n, p);
    std::vector<int> group(spec.n), sex(spec.n);
    Vector event_time(n), censor_unit(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
        const auto ui = static_cast<std::size_t>(i);
        group[ui] = static_cast<int>(rng.below(2));
        sex[ui] = static_cast<int>(rng.below(2));
        X(i, 0) += spec.group_feature_shift * group[ui];
        double rate = std::exp(X.row(i).dot(beta));
        if (auto it = spec.group_bias.find(group[ui]); it != spec.group_bias.end()) rate *= it->second;
        event_time[i] = rng.exponential() / rate;
        censor_unit[i] = rng.exponential();
    }

    auto censored_fraction = [&](double rate) {
        Eigen::Index c = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (censor_unit[i] / rate < event_time[i]) ++c;
        return static_cast<double>(c) / static_cast<double>(n);
    };

    double censor_rate = 0.0;
    if (spec.censoring_rate_target > 0) {
        double lo = -30.0, hi = 30.0;  // log censoring rate
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (censored_fraction(std::exp(mid)) < spec.censoring_rate_target ? lo : hi) = mid;
        }
        censor_rate = std::exp(hi);
        if (std::abs(censored_fraction(censor_rate) - spec.censoring_rate_target) > 0.05)
            throw NumericError("synthetic censoring calibration failed to reach the target rate");
    }

    Vector time(n);
    std::vector<bool> event(spec.n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = censor_rate > 0 ? censor_unit[i] / censor_rate
                                         : std::numeric_limits<double>::infinity();
        const bool observed = event_time[i] <= c;
        time[i] = observed ? event_time[i] : c;
        event[static_cast<std::size_t>(i)] = observed;
    }

    std::map<std::string, ProtectedColumn> prot;
    prot.emplace("group", ProtectedColumn{group, {0, 1}, {"0", "1"}});
    prot.emplace("sex", ProtectedColumn{sex, {0, 1}, {"0", "1"}});
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
    return SurvivalDataset(std::move(X), std::move(time), std::move(event), std::move(prot),
                           std::move(names));
}

void write_dataset_csv(const SurvivalDataset& data, std::ostream& out) {
    out << "time,event";
    for (const auto& name : data.feature_names()) out << ',' << csv_escape(name);
    for (const auto& [name, col] : data.protected_attributes()) out << ',' << csv_escape(name);
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << format_number(data.event_time()[r]) << ',' << (data.event_indicator()[i] ? 1 : 0);
        for (Eigen::Index j = 0; j < data.covariates().cols(); ++j)
            out << ',' << format_number(data.covariates()(r, j));
        for (const auto& [name, col] : data.protected_attributes()) {
            const auto k = std::find(col.codes.begin(), col.codes.end(), col.values[i]) -
                           col.codes.begin();
            out << ',' << csv_escape(col.labels[static_cast<std::size_t>(k)]);
        }
        out << '\n';
    }
}

DatasetSchema synthetic_schema(const SurvivalDataset& data) {
    DatasetSchema s;
    s.time_column = "time";
    s.event_column = "event";
    s.event_true_values = {"1"};
    for (const auto& name : data.feature_names()) s.features.push_back({name, {}, {}});
    for (const auto& [name, col] : data.protected_attributes()) {
        ProtectedSpec p{name, name, {}, {}};
        for (std::size_t k = 0; k < col.codes.size(); ++k) p.coding[col.labels[k]] = col.codes[k];
        s.protected_attributes.push_back(std::move(p));
    }
    if (data.has_protected("group")) s.group_attribute = "group";
    return s;
}

}  // namespace fcox
