#include "fcox/fairness.hpp"

#include "fcox/error.hpp"

#include <algorithm>
#include <cmath>

namespace fcox {
namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

Vector hazards(const Matrix& standardized, const Vector& beta) {
    Vector h = (standardized * beta).array().exp().matrix();
    if (!h.allFinite()) throw NumericError("relative hazard is not finite");
    return h;
}

// Mean of h_i * x~_i over the selected rows, i.e. the gradient of the mean hazard.
Vector mean_hazard_gradient(const Matrix& standardized, const Vector& hazard,
                            const std::vector<Eigen::Index>& rows) {
    Vector g = Vector::Zero(standardized.cols());
    for (auto r : rows) g.noalias() += hazard[r] * standardized.row(r).transpose();
    return g / static_cast<double>(rows.size());
}

}  // namespace

PenaltyKind kind_of(const FairnessPenalty& penalty) {
    return static_cast<PenaltyKind>(penalty.index());
}

const char* to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::individual: return "individual";
        case PenaltyKind::group: return "group";
        case PenaltyKind::intersectional: return "intersectional";
    }
    return "?";
}

PenaltyKind parse_penalty_kind(const std::string& name) {
    if (name == "individual") return PenaltyKind::individual;
    if (name == "group") return PenaltyKind::group;
    if (name == "intersectional") return PenaltyKind::intersectional;
    throw InvalidArgument("unknown penalty kind '" + name + "'");
}

ProtectedSpace ProtectedSpace::from_dataset(const SurvivalDataset& data,
                                            std::vector<std::string> attributes,
                                            std::size_t min_subgroup_count) {
    ProtectedSpace space;
    space.attributes = std::move(attributes);
    space.min_subgroup_count = min_subgroup_count;
    space.subgroups = {{}};
    for (const auto& name : space.attributes) {
        const auto& codes = data.protected_column(name).codes;
        space.codes.push_back(codes);
        std::vector<std::vector<int>> next;
        for (const auto& prefix : space.subgroups) {
            for (int c : codes) {
                auto tuple = prefix;
                tuple.push_back(c);
                next.push_back(std::move(tuple));
            }
        }
        space.subgroups = std::move(next);
    }
    space.validate();
    return space;
}

void ProtectedSpace::validate() const {
    if (attributes.empty()) throw InvalidArgument("protected space needs at least one attribute");
    if (codes.size() != attributes.size())
        throw InvalidArgument("protected space codes do not match attributes");
    if (min_subgroup_count < 1) throw InvalidArgument("min_subgroup_count must be >= 1");
    std::size_t expected = 1;
    for (const auto& c : codes) expected *= c.size();
    if (subgroups.size() != expected)
        throw InvalidArgument("protected space subgroups are not the full cross product");
}

namespace detail {

PenaltyEvaluation individual_kernel(const Matrix& standardized, const Vector& hazard,
                                    double distance_scale, bool want_gradient) {
    const auto n = standardized.rows();
    const auto p = standardized.cols();
    PenaltyEvaluation out{0.0, Vector::Zero(p)};
    if (n < 2) return out;

    // d|h_i - h_j| = s (h_i x~_i - h_j x~_j), so the subgradient is
    // sum_i coeff_i h_i x~_i with per-subject accumulated signs.
    Vector coeff = Vector::Zero(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double diff = hazard[i] - hazard[j];
            const double dist = distance_scale * (standardized.row(i) - standardized.row(j)).norm();
            const double excess = std::abs(diff) - dist;
            if (excess > 0) {
                total += excess;
                const double s = sign(diff);
                coeff[i] += s;
                coeff[j] -= s;
            }
        }
    }
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    out.value = total / pairs;
    if (want_gradient) {
        out.subgradient =
            standardized.transpose() * (coeff.array() * hazard.array()).matrix() / pairs;
    }
    return out;
}

PenaltyEvaluation group_kernel(const Matrix& standardized, const Vector& hazard,
                               const ProtectedColumn& column, std::size_t min_group_count,
                               bool want_gradient) {
    const auto n = standardized.rows();
    const auto p = standardized.cols();
    const double population_mean = hazard.mean();

    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;

    bool any = false;
    double best = -1.0;
    double best_sign = 0.0;
    std::vector<Eigen::Index> best_rows;
    for (int code : column.codes) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < n; ++i)
            if (column.values[static_cast<std::size_t>(i)] == code) rows.push_back(i);
        if (rows.empty() || rows.size() < min_group_count) continue;
        any = true;
        double sum = 0.0;
        for (auto r : rows) sum += hazard[r];
        const double deviation = sum / static_cast<double>(rows.size()) - population_mean;
        if (std::abs(deviation) > best) {
            best = std::abs(deviation);
            best_sign = sign(deviation);
            best_rows = std::move(rows);
        }
    }
    if (!any) throw NumericError("group fairness: every group is empty or below the minimum count");

    PenaltyEvaluation out{best, Vector::Zero(p)};
    if (want_gradient && best_sign != 0.0) {
        out.subgradient = best_sign * (mean_hazard_gradient(standardized, hazard, best_rows) -
                                       mean_hazard_gradient(standardized, hazard, all));
    }
    return out;
}

PenaltyEvaluation intersectional_kernel(const Matrix& standardized, const Vector& hazard,
                                        const std::vector<std::size_t>& subgroup_of,
                                        std::size_t num_subgroups,
                                        std::size_t min_subgroup_count, bool want_gradient) {
    const auto n = standardized.rows();
    const auto p = standardized.cols();
    std::vector<std::vector<Eigen::Index>> members(num_subgroups);
    for (Eigen::Index i = 0; i < n; ++i) members[subgroup_of[static_cast<std::size_t>(i)]].push_back(i);

    std::vector<std::size_t> populated;
    std::vector<double> log_mean(num_subgroups, 0.0);
    for (std::size_t s = 0; s < num_subgroups; ++s) {
        if (members[s].empty() || members[s].size() < min_subgroup_count) continue;
        double sum = 0.0;
        for (auto r : members[s]) sum += hazard[r];
        log_mean[s] = std::log(sum / static_cast<double>(members[s].size()));
        populated.push_back(s);
    }
    if (populated.size() < 2)
        throw NumericError("intersectional fairness needs at least two populated subgroups");

    double best = -1.0;
    std::size_t best_a = 0, best_b = 0;
    for (std::size_t a = 0; a < populated.size(); ++a) {
        for (std::size_t b = a + 1; b < populated.size(); ++b) {
            const double gap = std::abs(log_mean[populated[a]] - log_mean[populated[b]]);
            if (gap > best) {
                best = gap;
                best_a = populated[a];
                best_b = populated[b];
            }
        }
    }

    PenaltyEvaluation out{best, Vector::Zero(p)};
    const double s = sign(log_mean[best_a] - log_mean[best_b]);
    if (want_gradient && s != 0.0) {
        // d log(mean) = d mean / mean
        const Vector ga = mean_hazard_gradient(standardized, hazard, members[best_a]) /
                          std::exp(log_mean[best_a]);
        const Vector gb = mean_hazard_gradient(standardized, hazard, members[best_b]) /
                          std::exp(log_mean[best_b]);
        out.subgradient = s * (ga - gb);
    }
    return out;
}

std::vector<std::size_t> subgroup_membership(const SurvivalDataset& data,
                                             const ProtectedSpace& space) {
    space.validate();
    std::vector<std::size_t> index(data.size(), 0);
    for (std::size_t a = 0; a < space.attributes.size(); ++a) {
        const auto& col = data.protected_column(space.attributes[a]);
        const auto& codes = space.codes[a];
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto it = std::find(codes.begin(), codes.end(), col.values[i]);
            if (it == codes.end())
                throw InvalidArgument("attribute '" + space.attributes[a] +
                                      "' has a code outside the protected space");
            index[i] = index[i] * codes.size() + static_cast<std::size_t>(it - codes.begin());
        }
    }
    return index;
}

}  // namespace detail

double individual_fairness(const CoxModel& model, const Matrix& X, double distance_scale) {
    if (!(distance_scale > 0)) throw InvalidArgument("distance_scale must be positive");
    if (X.rows() < 2) {
        warn("individual fairness needs at least two subjects; returning 0");
        return 0.0;
    }
    const Matrix xs = model.standardize(X);
    return detail::individual_kernel(xs, hazards(xs, model.beta), distance_scale, false).value;
}

namespace {

void warn_small_groups(const ProtectedColumn& col, const std::string& name, std::size_t min_count) {
    for (std::size_t k = 0; k < col.codes.size(); ++k) {
        const auto c = col.count(col.codes[k]);
        if (c < min_count || c == 0) {
            warn("group '" + col.labels[k] + "' of attribute '" + name + "' has " +
                 std::to_string(c) + " members and is skipped");
        }
    }
}

}  // namespace

double group_fairness(const CoxModel& model, const SurvivalDataset& data,
                      const std::string& attribute, std::size_t min_group_count) {
    const auto& col = data.protected_column(attribute);
    warn_small_groups(col, attribute, min_group_count);
    const Matrix xs = model.standardize(data.covariates());
    return detail::group_kernel(xs, hazards(xs, model.beta), col, min_group_count, false).value;
}

double intersectional_fairness(const CoxModel& model, const SurvivalDataset& data,
                               const ProtectedSpace& space) {
    const auto membership = detail::subgroup_membership(data, space);
    const Matrix xs = model.standardize(data.covariates());
    return detail::intersectional_kernel(xs, hazards(xs, model.beta), membership,
                                         space.subgroups.size(), space.min_subgroup_count, false)
        .value;
}

PenaltyEvaluation penalty_value_and_subgradient(const FairnessPenalty& penalty,
                                                const CoxModel& model,
                                                const SurvivalDataset& batch) {
    const Matrix xs = model.standardize(batch.covariates());
    const Vector h = hazards(xs, model.beta);
    return std::visit(
        [&](const auto& pen) -> PenaltyEvaluation {
            using T = std::decay_t<decltype(pen)>;
            if constexpr (std::is_same_v<T, IndividualPenalty>) {
                if (!(pen.distance_scale > 0))
                    throw InvalidArgument("distance_scale must be positive");
                return detail::individual_kernel(xs, h, pen.distance_scale, true);
            } else if constexpr (std::is_same_v<T, GroupPenalty>) {
                return detail::group_kernel(xs, h, batch.protected_column(pen.attribute),
                                            pen.min_group_count, true);
            } else {
                const auto membership = detail::subgroup_membership(batch, pen.space);
                return detail::intersectional_kernel(xs, h, membership, pen.space.subgroups.size(),
                                                     pen.space.min_subgroup_count, true);
            }
        },
        penalty);
}

}  // namespace fcox
