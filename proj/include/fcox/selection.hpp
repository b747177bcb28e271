#pragma once

#include "fcox/metrics.hpp"
#include "fcox/optimizer.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fcox {

struct SplitSpec {
    double test_fraction = 0.20;
    double dev_fraction_of_train = 0.20;
    std::uint64_t seed = 0;
    std::optional<std::string> stratify_on;
};

struct Splits {
    IndexList train_rows, dev_rows, test_rows;
    SurvivalDataset train, dev, test;
};

// Seeded shuffle split into train/dev/test. With `stratify_on`, each
// (attribute code, event indicator) stratum is split separately.
Splits split(const SurvivalDataset& data, const SplitSpec& spec);

// Partition sizes (train, dev, test) for n rows, rounding to nearest.
std::array<std::size_t, 3> split_sizes(std::size_t n, double test_fraction, double dev_fraction);

struct SweepEntry {
    double lambda = 0.0;
    double c_index_dev = 0.0;
    FairnessScores fairness;
    double final_objective = 0.0;
    std::size_t iterations = 0;
    double wall_time = 0.0;
    bool failed = false;
    std::string error;
    std::optional<CoxModel> model;
};

struct SweepResult {
    PenaltyKind kind = PenaltyKind::group;
    SweepEntry baseline;
    std::vector<SweepEntry> entries;  // penalized models in grid order
    double selected_lambda = 0.0;
    std::string selection_rule;

    // Entry for lambda (the baseline for 0). Throws when absent.
    const SweepEntry& entry(double lambda) const;
};

struct SweepOptions {
    TrainConfig baseline_config = default_train_config(std::nullopt);
    TrainConfig penalized_config;  // lambda is overwritten per grid point
    FairnessSettings fairness;
    double max_degradation = 0.05;
    bool parallel = true;
};

// One model per grid value plus the unpenalized baseline, all scored on dev.
// Grid value 0 is the baseline itself. A failed training marks its entry
// and the sweep continues. The selection rule is applied with
// `options.max_degradation`.
SweepResult lambda_sweep(const SurvivalDataset& train, const SurvivalDataset& dev,
                         const FairnessPenalty& penalty, const std::vector<double>& grid,
                         const SweepOptions& options);

struct Selection {
    double lambda = 0.0;
    bool within_budget = true;  // false when no penalized model qualified
};

// Fairest penalized entry (under the sweep's own measure) whose dev C-index
// is at least (1 - max_degradation) times the baseline's; ties go to the
// larger lambda. Falls back to 0 with a warning.
Selection select_lambda(const SweepResult& sweep, double max_degradation = 0.05);

std::vector<double> default_lambda_grid();

}  // namespace fcox
