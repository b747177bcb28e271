#pragma once

#include "fcox/survival.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fcox {

enum class MissingPolicy { drop_row, error };

struct FeatureSpec {
    std::string name;    // column name; also the feature name
    std::map<std::string, double> coding;  // categorical raw -> value; empty = numeric
    std::optional<double> fill;            // substitute for missing values
};

// A protected attribute read from `column`, either through an explicit
// raw -> code map or a numeric threshold (<= threshold -> 0, > -> 1).
struct ProtectedSpec {
    std::string name;
    std::string column;
    std::map<std::string, int> coding;
    std::optional<double> threshold;
};

struct DatasetSchema {
    std::string time_column;
    std::string event_column;
    std::vector<std::string> event_true_values{"1"};
    std::vector<FeatureSpec> features;
    std::vector<ProtectedSpec> protected_attributes;
    bool include_protected_as_features = false;
    MissingPolicy missing_policy = MissingPolicy::drop_row;
    std::vector<std::string> missing_values{"", "NA", "?"};
    std::optional<std::string> group_attribute;  // default group penalty attribute

    void validate() const;
};

// Schema files are JSON documents with the field names above.
DatasetSchema parse_schema(const std::string& json_text);
DatasetSchema load_schema(const std::filesystem::path& path);
std::string schema_to_json(const DatasetSchema& schema);

// RFC-4180 CSV: header row first; quoted fields may contain commas, quotes
// ("") and line breaks.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws DataError
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
};

SurvivalDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema,
                         LoadReport* report = nullptr);
SurvivalDataset load_table(const CsvTable& table, const DatasetSchema& schema,
                           LoadReport* report = nullptr);

struct SyntheticSpec {
    std::size_t n = 1000;
    std::vector<double> beta_true;
    double censoring_rate_target = 0.2;
    std::map<int, double> group_bias;  // hazard multiplier per "group" code
    double group_feature_shift = 0.0;  // added to feature 0 for group 1
    std::uint64_t seed = 0;

    void validate() const;
};

// Standard-normal covariates x0..x{p-1}; protected attributes "group" and
// "sex" (independent fair coins). Event times are exponential with rate
// exp(beta . x) * group_bias[group]; censoring is exponential with its rate
// tuned so the censored fraction is within 5 points of the target.
SurvivalDataset generate_synthetic(const SyntheticSpec& spec);

// Writes a dataset in the CSV layout read by `synthetic_schema()`.
void write_dataset_csv(const SurvivalDataset& data, std::ostream& out);
DatasetSchema synthetic_schema(const SurvivalDataset& data);

}  // namespace fcox
