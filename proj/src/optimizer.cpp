#include "fcox/optimizer.hpp"

#include "fcox/error.hpp"
#include "fcox/random.hpp"

#include <chrono>
#include <cmath>

namespace fcox {

DivergenceError::DivergenceError(std::size_t iteration, const std::string& what)
    : NumericError("training diverged at iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

void TrainConfig::validate(const std::optional<FairnessPenalty>& penalty) const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
    if (lambda > 0 && !penalty) throw InvalidArgument("lambda > 0 requires a fairness penalty");
    if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
        throw InvalidArgument("Adam decay rates must lie in [0, 1)");
    if (!(adam_epsilon > 0)) throw InvalidArgument("adam_epsilon must be positive");
    if (const auto* fb = std::get_if<FullBatch>(&regime)) {
        if (fb->iterations < 1) throw InvalidArgument("iterations must be >= 1");
    } else {
        const auto& mb = std::get<MiniBatch>(regime);
        if (mb.epochs < 1) throw InvalidArgument("epochs must be >= 1");
        if (mb.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
        if (penalty && kind_of(*penalty) == PenaltyKind::individual && mb.batch_size < 2)
            throw InvalidArgument("individual fairness needs batch_size >= 2");
    }
}

double objective(const CoxModel& model, const SurvivalDataset& data,
                 const std::optional<FairnessPenalty>& penalty, double lambda) {
    if (!(lambda >= 0)) throw InvalidArgument("lambda must be >= 0");
    if (lambda > 0 && !penalty) throw InvalidArgument("lambda > 0 requires a fairness penalty");
    const double loss = neg_log_partial_likelihood(model, data, true);
    if (lambda == 0) return loss;
    return loss + lambda * penalty_value_and_subgradient(*penalty, model, data).value;
}

namespace {

// Penalty evaluation on a set of rows of the training data, with the
// per-row protected information gathered once.
class PenaltyTerm {
public:
    PenaltyTerm(const FairnessPenalty& penalty, const SurvivalDataset& data)
        : penalty_(penalty) {
        if (const auto* g = std::get_if<GroupPenalty>(&penalty_)) {
            column_ = data.protected_column(g->attribute);
            if (column_.codes.empty()) throw InvalidArgument("group attribute has no codes");
        } else if (const auto* s = std::get_if<IntersectionalPenalty>(&penalty_)) {
            membership_ = detail::subgroup_membership(data, s->space);
        }
    }

    PenaltyEvaluation evaluate(const Matrix& xs, const Vector& hazard,
                               const std::vector<std::size_t>* rows) const {
        switch (kind_of(penalty_)) {
            case PenaltyKind::individual:
                return detail::individual_kernel(
                    xs, hazard, std::get<IndividualPenalty>(penalty_).distance_scale, true);
            case PenaltyKind::group: {
                const auto& g = std::get<GroupPenalty>(penalty_);
                if (!rows) return detail::group_kernel(xs, hazard, column_, g.min_group_count, true);
                ProtectedColumn sub{{}, column_.codes, column_.labels};
                for (auto r : *rows) sub.values.push_back(column_.values[r]);
                return detail::group_kernel(xs, hazard, sub, g.min_group_count, true);
            }
            case PenaltyKind::intersectional: {
                const auto& space = std::get<IntersectionalPenalty>(penalty_).space;
                if (!rows)
                    return detail::intersectional_kernel(xs, hazard, membership_,
                                                         space.subgroups.size(),
                                                         space.min_subgroup_count, true);
                std::vector<std::size_t> sub;
                for (auto r : *rows) sub.push_back(membership_[r]);
                return detail::intersectional_kernel(xs, hazard, sub, space.subgroups.size(),
                                                     space.min_subgroup_count, true);
            }
        }
        return {};
    }

private:
    FairnessPenalty penalty_;
    ProtectedColumn column_;
    std::vector<std::size_t> membership_;
};

class Adam {
public:
    Adam(const TrainConfig& c, Eigen::Index p)
        : config_(c), m_(Vector::Zero(p)), v_(Vector::Zero(p)) {}

    void step(Vector& beta, const Vector& grad) {
        ++t_;
        m_ = config_.adam_beta1 * m_ + (1 - config_.adam_beta1) * grad;
        v_ = config_.adam_beta2 * v_ + (1 - config_.adam_beta2) * grad.cwiseAbs2();
        const double bc1 = 1 - std::pow(config_.adam_beta1, static_cast<double>(t_));
        const double bc2 = 1 - std::pow(config_.adam_beta2, static_cast<double>(t_));
        beta.array() -= config_.learning_rate * (m_.array() / bc1) /
                        ((v_.array() / bc2).sqrt() + config_.adam_epsilon);
    }

private:
    const TrainConfig& config_;
    Vector m_, v_;
    std::size_t t_ = 0;
};

}  // namespace

TrainResult train(const SurvivalDataset& data, const std::optional<FairnessPenalty>& penalty,
                  const TrainConfig& config) {
    config.validate(penalty);
    if (data.num_events() == 0) throw NumericError("no events");
    const auto start = std::chrono::steady_clock::now();

    CoxModel model = CoxModel::fit_standardization(data);
    const Matrix xs = model.standardize(data.covariates());
    const auto p = xs.cols();
    const bool penalized = penalty && config.lambda > 0;
    std::optional<PenaltyTerm> term;
    if (penalized) term.emplace(*penalty, data);

    Vector beta = Vector::Zero(p);
    Adam adam(config, p);
    TrainReport report;

    auto step = [&](const PartialLikelihood& lik, const Matrix& batch_x,
                    const std::vector<std::size_t>* rows) {
        const std::size_t iteration = report.loss_trace.size();
        Vector grad;
        double value = lik.value_and_gradient(beta, &grad, true);
        double pen = 0.0;
        if (penalized) {
            const Vector hazard = (batch_x * beta).array().exp().matrix();
            if (!hazard.allFinite()) throw DivergenceError(iteration, "relative hazard overflow");
            const auto eval = term->evaluate(batch_x, hazard, rows);
            pen = eval.value;
            value += config.lambda * pen;
            grad += config.lambda * eval.subgradient;
        }
        if (!std::isfinite(value) || !grad.allFinite())
            throw DivergenceError(iteration, "objective is not finite");
        report.loss_trace.push_back(value);
        report.penalty_trace.push_back(pen);
        adam.step(beta, grad);
        if (!beta.allFinite()) throw DivergenceError(iteration, "coefficients are not finite");
    };

    if (const auto* fb = std::get_if<FullBatch>(&config.regime)) {
        const PartialLikelihood lik(xs, data.event_time(), data.event_indicator());
        for (std::size_t it = 0; it < fb->iterations; ++it) step(lik, xs, nullptr);
    } else {
        const auto& mb = std::get<MiniBatch>(config.regime);
        Rng rng(config.seed);
        const std::size_t n = data.size();
        const auto& events = data.event_indicator();
        for (std::size_t epoch = 0; epoch < mb.epochs; ++epoch) {
            const auto order = rng.permutation(n);
            std::size_t begin = 0;
            while (begin < n) {
                std::size_t end = std::min(n, begin + mb.batch_size);
                // A single trailing subject joins the previous batch.
                if (n - end == 1) end = n;
                std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                              order.begin() + static_cast<std::ptrdiff_t>(end));
                const auto m = static_cast<Eigen::Index>(rows.size());
                Matrix bx(m, p);
                Vector bt(m);
                std::vector<bool> be(rows.size());
                for (Eigen::Index k = 0; k < m; ++k) {
                    const auto r = rows[static_cast<std::size_t>(k)];
                    bx.row(k) = xs.row(static_cast<Eigen::Index>(r));
                    bt[k] = data.event_time()[static_cast<Eigen::Index>(r)];
                    be[static_cast<std::size_t>(k)] = events[r];
                }
                const PartialLikelihood lik(bx, std::move(bt), std::move(be));
                step(lik, bx, &rows);
                begin = end;
            }
        }
    }

    model.beta = beta;
    report.final_beta = beta;
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(model), std::move(report)};
}

TrainConfig default_train_config(std::optional<PenaltyKind> kind, double lambda,
                                 std::uint64_t seed) {
    TrainConfig c;
    c.lambda = lambda;
    c.seed = seed;
    if (kind == PenaltyKind::individual) c.regime = MiniBatch{};
    return c;
}

}  // namespace fcox
