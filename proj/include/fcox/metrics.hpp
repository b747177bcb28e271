#pragma once

#include "fcox/fairness.hpp"
#include "fcox/survival.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fcox {

// Product-limit estimate. `survival[k]` holds on [times[k], times[k+1]).
struct KaplanMeierCurve {
    std::vector<double> times;
    std::vector<double> survival;
    bool for_censoring = false;

    double at(double t) const;          // S(t), right-continuous
    double left_limit(double t) const;  // S(t-)
};

// Harrell's C over pairs with T_i < T_j and E_i = 1; score ties count 1/2.
double concordance_index(std::span<const double> risk_scores, std::span<const double> times,
                         const std::vector<bool>& events);

KaplanMeierCurve kaplan_meier(std::span<const double> times, const std::vector<bool>& indicator);

// Censoring survival curve G, fit with indicator 1 - E.
KaplanMeierCurve censoring_curve(const SurvivalDataset& data);

// IPCW Brier score at t_star.
double brier_score(const CoxModel& model, const BaselineHazard& baseline,
                   const SurvivalDataset& eval_set, const KaplanMeierCurve& censor_curve,
                   double t_star);

struct TimeDependentAuc {
    std::vector<double> times;  // grid points that had cases and controls
    std::vector<double> auc;
    double integrated = 0.0;    // unweighted mean over `auc`
};

// Cumulative/dynamic AUC with 1/G(T_i-) case weights.
TimeDependentAuc time_dependent_auc(const CoxModel& model, const SurvivalDataset& eval_set,
                                    const KaplanMeierCurve& censor_curve,
                                    std::span<const double> time_grid);

// Same computation from raw risk scores.
TimeDependentAuc time_dependent_auc(std::span<const double> risk_scores,
                                    std::span<const double> times, const std::vector<bool>& events,
                                    const KaplanMeierCurve& censor_curve,
                                    std::span<const double> time_grid);

// Linear-interpolated sample quantile (R type 7) of `values`, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Median observed event time.
double default_brier_horizon(const SurvivalDataset& train);

// `points` quantiles of observed event times equally spaced from the 10th
// to the 90th percentile.
std::vector<double> default_auc_grid(const SurvivalDataset& train, std::size_t points = 100);

struct FairnessSettings {
    double distance_scale = 1.0;
    std::string group_attribute;
    std::vector<std::string> intersectional_attributes;
    std::size_t min_subgroup_count = 1;
};

struct FairnessScores {
    double individual = 0.0;
    double group = 0.0;
    double intersectional = 0.0;

    double of(PenaltyKind kind) const;
};

FairnessScores fairness_scores(const CoxModel& model, const SurvivalDataset& data,
                               const FairnessSettings& settings);

struct MetricReport {
    double c_index = 0.0;
    double brier = 0.0;
    double time_dependent_auc = 0.0;
    double log_partial_likelihood = 0.0;  // per event, sign as a log-likelihood
    FairnessScores fairness;
};

// Full report on `eval_set`. Baseline hazard, censoring curve, Brier horizon
// and AUC grid all come from `train`.
MetricReport evaluate(const CoxModel& model, const SurvivalDataset& train,
                      const SurvivalDataset& eval_set, const FairnessSettings& settings,
                      std::optional<double> t_star = std::nullopt);

}  // namespace fcox
