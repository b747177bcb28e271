#pragma once

#include "fcox/error.hpp"
#include "fcox/fairness.hpp"
#include "fcox/survival.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace fcox {

struct FullBatch {
    std::size_t iterations = 500;
};

struct MiniBatch {
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
};

using Regime = std::variant<FullBatch, MiniBatch>;

struct TrainConfig {
    double lambda = 0.0;
    double learning_rate = 0.01;
    Regime regime = FullBatch{};
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate(const std::optional<FairnessPenalty>& penalty) const;
};

struct TrainReport {
    Vector final_beta;
    std::vector<double> loss_trace;     // objective at each step, before the update
    std::vector<double> penalty_trace;  // penalty value at each step
    double wall_time = 0.0;             // seconds

    std::size_t iterations() const { return loss_trace.size(); }
};

struct TrainResult {
    CoxModel model;
    TrainReport report;
};

// Thrown when the objective becomes non-finite; carries the step index.
class DivergenceError : public NumericError {
public:
    DivergenceError(std::size_t iteration, const std::string& what);
    std::size_t iteration() const { return iteration_; }

private:
    std::size_t iteration_;
};

// Normalized negative log partial likelihood plus lambda * penalty.
double objective(const CoxModel& model, const SurvivalDataset& data,
                 const std::optional<FairnessPenalty>& penalty, double lambda);

// Adam from beta = 0 on standardized covariates (standardization fitted on
// `data`). Mini-batches are reshuffled every epoch with the seeded Rng and
// use within-batch risk sets. Deterministic given the config.
TrainResult train(const SurvivalDataset& data, const std::optional<FairnessPenalty>& penalty,
                  const TrainConfig& config);

// Regime used for each model family: individual penalties train on
// mini-batches, everything else on the full batch.
TrainConfig default_train_config(std::optional<PenaltyKind> kind, double lambda = 0.0,
                                 std::uint64_t seed = 0);

}  // namespace fcox
