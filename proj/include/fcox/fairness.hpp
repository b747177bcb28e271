#pragma once

#include "fcox/survival.hpp"

#include <string>
#include <variant>
#include <vector>

namespace fcox {

// Cross product of the declared codes of several protected attributes.
struct ProtectedSpace {
    std::vector<std::string> attributes;
    std::vector<std::vector<int>> codes;      // per attribute
    std::vector<std::vector<int>> subgroups;  // lexicographic cross product
    std::size_t min_subgroup_count = 1;

    static ProtectedSpace from_dataset(const SurvivalDataset& data,
                                       std::vector<std::string> attributes,
                                       std::size_t min_subgroup_count = 1);

    void validate() const;
};

struct IndividualPenalty {
    double distance_scale = 1.0;
};

struct GroupPenalty {
    std::string attribute;
    std::size_t min_group_count = 1;
};

struct IntersectionalPenalty {
    ProtectedSpace space;
};

using FairnessPenalty = std::variant<IndividualPenalty, GroupPenalty, IntersectionalPenalty>;

enum class PenaltyKind { individual, group, intersectional };

PenaltyKind kind_of(const FairnessPenalty& penalty);
const char* to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(const std::string& name);

struct PenaltyEvaluation {
    double value = 0.0;
    Vector subgradient;
};

// Mean over pairs i<j of max(0, |h_i - h_j| - scale * ||x~_i - x~_j||).
double individual_fairness(const CoxModel& model, const Matrix& X, double distance_scale);

// Worst deviation of a group's mean relative hazard from the population mean.
double group_fairness(const CoxModel& model, const SurvivalDataset& data,
                      const std::string& attribute, std::size_t min_group_count = 1);

// Worst absolute log-ratio between subgroup mean relative hazards.
double intersectional_fairness(const CoxModel& model, const SurvivalDataset& data,
                               const ProtectedSpace& space);

// Penalty value and a subgradient with respect to beta. Max operators use
// the first attaining element; |.| and the hinge take subgradient 0 at 0.
PenaltyEvaluation penalty_value_and_subgradient(const FairnessPenalty& penalty,
                                                const CoxModel& model,
                                                const SurvivalDataset& batch);

namespace detail {

// Kernels over standardized covariates and precomputed relative hazards,
// shared by the public measures and the trainer.
PenaltyEvaluation individual_kernel(const Matrix& standardized, const Vector& hazard,
                                    double distance_scale, bool want_gradient);

PenaltyEvaluation group_kernel(const Matrix& standardized, const Vector& hazard,
                               const ProtectedColumn& column, std::size_t min_group_count,
                               bool want_gradient);

// `subgroup_of[i]` indexes ProtectedSpace::subgroups for row i.
PenaltyEvaluation intersectional_kernel(const Matrix& standardized, const Vector& hazard,
                                        const std::vector<std::size_t>& subgroup_of,
                                        std::size_t num_subgroups,
                                        std::size_t min_subgroup_count, bool want_gradient);

std::vector<std::size_t> subgroup_membership(const SurvivalDataset& data,
                                             const ProtectedSpace& space);

}  // namespace detail

}  // namespace fcox
