#pragma once

#include "fcox/data_io.hpp"
#include "fcox/metrics.hpp"
#include "fcox/selection.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fcox {

enum class ReportFormat { json, csv };

// Everything a command needs. Field names double as config-file keys and
// command-line flags (--learning_rate, --batch_size, ...).
struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path schema;
    std::string penalty = "none";  // none | individual | group | intersectional
    double lambda = 0.0;
    double learning_rate = 0.01;
    std::size_t iterations = 500;
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    double dev_fraction = 0.2;
    std::string stratify_on;
    std::vector<double> grid = default_lambda_grid();
    std::filesystem::path out = "out";
    ReportFormat format = ReportFormat::json;
    double distance_scale = 1.0;
    std::string group_attribute;
    std::vector<std::string> intersectional_attributes;
    std::size_t min_subgroup_count = 1;
    double max_degradation = 0.05;
    bool parallel = true;
    // compare: fixed lambdas per penalty kind skip the sweep for that kind
    std::map<std::string, double> compare_lambdas;
    // synth
    std::size_t synth_n = 2000;
    std::vector<double> synth_beta{0.8, -0.5, 0.3};
    double synth_censoring = 0.2;
    double synth_group_bias = 1.0;
    double synth_group_shift = 0.0;
};

// Applies the keys of a JSON config document onto `config`.
void apply_config_json(RunConfig& config, const std::string& json_text);

// Dataset plus schema-derived defaults, ready for splitting.
struct PreparedData {
    DatasetSchema schema;
    SurvivalDataset data;
    FairnessSettings fairness;
};

PreparedData prepare_data(const RunConfig& config);

TrainConfig train_config_for(const RunConfig& config, std::optional<PenaltyKind> kind,
                             double lambda);

FairnessPenalty make_penalty(PenaltyKind kind, const SurvivalDataset& train,
                             const FairnessSettings& settings);

// Human-readable table of a report with four decimals.
void print_report(std::ostream& out, const std::string& title, const MetricReport& report);

int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_sweep(const RunConfig& config, std::ostream& out);
int cmd_compare(const RunConfig& config, std::ostream& out);
int cmd_synth(const RunConfig& config, std::ostream& out);

// Entry point: `fcox <train|sweep|compare|synth> [flags]`. Returns 0 on
// success, 1 on runtime/numeric failure, 2 on usage or configuration errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcox
