#include "fcox/metrics.hpp"

#include "fcox/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace fcox {
namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || b != c) throw InvalidArgument("scores, times and events must have equal length");
}

// Fenwick tree of counts over score ranks.
class RankCounter {
public:
    explicit RankCounter(std::size_t n) : tree_(n + 1, 0) {}

    void add(std::size_t rank) {
        ++total_;
        for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
    }

    // Number of inserted ranks < rank.
    std::int64_t below(std::size_t rank) const {
        std::int64_t s = 0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

    std::int64_t total() const { return total_; }

private:
    std::vector<std::int64_t> tree_;
    std::int64_t total_ = 0;
};

std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double KaplanMeierCurve::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KaplanMeierCurve::left_limit(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double concordance_index(std::span<const double> risk_scores, std::span<const double> times,
                         const std::vector<bool>& events) {
    const std::size_t n = risk_scores.size();
    check_lengths(n, times.size(), events.size());
    for (double s : risk_scores)
        if (std::isnan(s)) throw InvalidArgument("risk scores contain NaN");

    std::vector<double> sorted(risk_scores.begin(), risk_scores.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i)
        rank[i] = static_cast<std::size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), risk_scores[i]) - sorted.begin());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

    // Walk from the latest time; the counter holds subjects with strictly
    // later times than the current block.
    RankCounter later(sorted.size());
    std::int64_t comparable = 0, concordant = 0, tied = 0;
    std::size_t begin = 0;
    while (begin < n) {
        std::size_t end = begin;
        while (end < n && times[order[end]] == times[order[begin]]) ++end;
        for (std::size_t k = begin; k < end; ++k) {
            const auto i = order[k];
            if (!events[i]) continue;
            const auto lower = later.below(rank[i]);
            const auto equal = later.below(rank[i] + 1) - lower;
            comparable += later.total();
            concordant += lower;
            tied += equal;
        }
        for (std::size_t k = begin; k < end; ++k) later.add(rank[order[k]]);
        begin = end;
    }
    if (comparable == 0) throw NumericError("degenerate: no comparable pairs");
    return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
           static_cast<double>(comparable);
}

KaplanMeierCurve kaplan_meier(std::span<const double> times, const std::vector<bool>& indicator) {
    if (times.size() != indicator.size())
        throw InvalidArgument("times and indicator must have equal length");
    if (times.empty()) throw InvalidArgument("kaplan_meier needs at least one observation");
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    KaplanMeierCurve km;
    double s = 1.0;
    std::size_t at_risk = times.size();
    std::size_t begin = 0;
    while (begin < order.size()) {
        std::size_t end = begin;
        std::size_t d = 0;
        while (end < order.size() && times[order[end]] == times[order[begin]]) {
            if (indicator[order[end]]) ++d;
            ++end;
        }
        if (d > 0) {
            s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            km.times.push_back(times[order[begin]]);
            km.survival.push_back(s);
        }
        at_risk -= end - begin;
        begin = end;
    }
    return km;
}

KaplanMeierCurve censoring_curve(const SurvivalDataset& data) {
    std::vector<bool> censored(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) censored[i] = !data.event_indicator()[i];
    auto km = kaplan_meier(as_span(data.event_time()), censored);
    km.for_censoring = true;
    return km;
}

double brier_score(const CoxModel& model, const BaselineHazard& baseline,
                   const SurvivalDataset& eval_set, const KaplanMeierCurve& censor_curve,
                   double t_star) {
    if (!(t_star >= 0)) throw InvalidArgument("Brier horizon must be >= 0");
    const double g_star = censor_curve.at(t_star);
    if (!(g_star > 0)) throw NumericError("horizon beyond censoring support");
    const Vector eta = model.linear_predictor(eval_set.covariates());
    const double h0 = baseline.at(t_star);
    const Vector& time = eval_set.event_time();
    const auto& event = eval_set.event_indicator();

    double sum = 0.0;
    std::size_t kept = 0, dropped = 0;
    for (Eigen::Index i = 0; i < time.size(); ++i) {
        const double s = std::exp(-h0 * std::exp(eta[i]));
        if (time[i] <= t_star && event[static_cast<std::size_t>(i)]) {
            const double g = censor_curve.left_limit(time[i]);
            if (!(g > 0)) {
                ++dropped;
                continue;
            }
            sum += s * s / g;
        } else if (time[i] > t_star) {
            sum += (1.0 - s) * (1.0 - s) / g_star;
        }
        ++kept;
    }
    if (dropped > 0)
        warn("Brier score dropped " + std::to_string(dropped) + " subjects with zero censoring weight");
    if (kept == 0) throw NumericError("Brier score has no subjects with positive weight");
    return sum / static_cast<double>(kept);
}

TimeDependentAuc time_dependent_auc(std::span<const double> risk_scores,
                                    std::span<const double> times, const std::vector<bool>& events,
                                    const KaplanMeierCurve& censor_curve,
                                    std::span<const double> time_grid) {
    const std::size_t n = risk_scores.size();
    check_lengths(n, times.size(), events.size());
    TimeDependentAuc out;
    std::size_t skipped = 0;
    std::vector<double> controls;
    for (double t : time_grid) {
        controls.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (times[j] > t) controls.push_back(risk_scores[j]);
        std::sort(controls.begin(), controls.end());

        double numerator = 0.0, weight_total = 0.0;
        std::size_t cases = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(times[i] <= t && events[i])) continue;
            const double g = censor_curve.left_limit(times[i]);
            if (!(g > 0)) continue;
            const double w = 1.0 / g;
            const auto lo = std::lower_bound(controls.begin(), controls.end(), risk_scores[i]);
            const auto hi = std::upper_bound(lo, controls.end(), risk_scores[i]);
            // twice the concordance credit: 2 per control outranked, 1 per tie
            const auto twice = 2 * (lo - controls.begin()) + (hi - lo);
            numerator += w * static_cast<double>(twice);
            weight_total += w;
            ++cases;
        }
        if (cases == 0 || controls.empty()) {
            ++skipped;
            continue;
        }
        out.times.push_back(t);
        out.auc.push_back(numerator /
                          (weight_total * 2.0 * static_cast<double>(controls.size())));
    }
    if (skipped > 0)
        warn("time-dependent AUC skipped " + std::to_string(skipped) +
             " grid points without cases or controls");
    if (out.auc.empty()) throw NumericError("time-dependent AUC: every grid point was degenerate");
    out.integrated =
        std::accumulate(out.auc.begin(), out.auc.end(), 0.0) / static_cast<double>(out.auc.size());
    return out;
}

TimeDependentAuc time_dependent_auc(const CoxModel& model, const SurvivalDataset& eval_set,
                                    const KaplanMeierCurve& censor_curve,
                                    std::span<const double> time_grid) {
    const Vector eta = model.linear_predictor(eval_set.covariates());
    return time_dependent_auc(as_span(eta), as_span(eval_set.event_time()),
                              eval_set.event_indicator(), censor_curve, time_grid);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidArgument("quantile of an empty sample");
    if (!(q >= 0 && q <= 1)) throw InvalidArgument("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

std::vector<double> event_times(const SurvivalDataset& data) {
    std::vector<double> out;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.event_indicator()[i]) out.push_back(data.event_time()[static_cast<Eigen::Index>(i)]);
    if (out.empty()) throw NumericError("no events");
    return out;
}

}  // namespace

double default_brier_horizon(const SurvivalDataset& train) {
    return quantile(event_times(train), 0.5);
}

std::vector<double> default_auc_grid(const SurvivalDataset& train, std::size_t points) {
    if (points < 2) throw InvalidArgument("AUC grid needs at least two points");
    auto ev = event_times(train);
    std::sort(ev.begin(), ev.end());
    std::vector<double> grid;
    for (std::size_t k = 0; k < points; ++k) {
        const double q = 0.1 + 0.8 * static_cast<double>(k) / static_cast<double>(points - 1);
        grid.push_back(quantile(ev, q));
    }
    return grid;
}

double FairnessScores::of(PenaltyKind kind) const {
    switch (kind) {
        case PenaltyKind::individual: return individual;
        case PenaltyKind::group: return group;
        case PenaltyKind::intersectional: return intersectional;
    }
    return 0.0;
}

FairnessScores fairness_scores(const CoxModel& model, const SurvivalDataset& data,
                               const FairnessSettings& settings) {
    if (settings.group_attribute.empty() || settings.intersectional_attributes.empty())
        throw InvalidArgument("fairness settings need a group attribute and intersectional attributes");
    FairnessScores f;
    f.individual = individual_fairness(model, data.covariates(), settings.distance_scale);
    f.group = group_fairness(model, data, settings.group_attribute, settings.min_subgroup_count);
    f.intersectional = intersectional_fairness(
        model, data,
        ProtectedSpace::from_dataset(data, settings.intersectional_attributes,
                                     settings.min_subgroup_count));
    return f;
}

MetricReport evaluate(const CoxModel& model, const SurvivalDataset& train,
                      const SurvivalDataset& eval_set, const FairnessSettings& settings,
                      std::optional<double> t_star) {
    MetricReport r;
    const Vector eta = model.linear_predictor(eval_set.covariates());
    r.c_index = concordance_index(as_span(eta), as_span(eval_set.event_time()),
                                  eval_set.event_indicator());
    const auto baseline = breslow_baseline(model, train);
    const auto g = censoring_curve(train);
    r.brier = brier_score(model, baseline, eval_set, g, t_star.value_or(default_brier_horizon(train)));
    const auto grid = default_auc_grid(train);
    r.time_dependent_auc = time_dependent_auc(model, eval_set, g, grid).integrated;
    r.log_partial_likelihood = -neg_log_partial_likelihood(model, eval_set, true);
    r.fairness = fairness_scores(model, eval_set, settings);
    return r;
}

}  // namespace fcox
