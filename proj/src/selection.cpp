#include "fcox/selection.hpp"

#include "fcox/error.hpp"
#include "fcox/random.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <sstream>

namespace fcox {

std::array<std::size_t, 3> split_sizes(std::size_t n, double test_fraction, double dev_fraction) {
    const auto test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const auto rest = n - std::min(test, n);
    const auto dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(rest)));
    return {rest - std::min(dev, rest), std::min(dev, rest), std::min(test, n)};
}

Splits split(const SurvivalDataset& data, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0 && spec.test_fraction < 1) ||
        !(spec.dev_fraction_of_train > 0 && spec.dev_fraction_of_train < 1))
        throw InvalidArgument("split fractions must lie in (0, 1)");

    // Strata keyed by (attribute code, event); a single stratum otherwise.
    std::map<std::pair<int, bool>, IndexList> strata;
    const ProtectedColumn* col =
        spec.stratify_on ? &data.protected_column(*spec.stratify_on) : nullptr;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (col)
            strata[{col->values[i], data.event_indicator()[i]}].push_back(i);
        else
            strata[{0, false}].push_back(i);
    }

    Rng rng(spec.seed);
    IndexList train, dev, test;
    for (auto& [key, rows] : strata) {
        rng.shuffle(std::span<std::size_t>(rows));
        const auto [n_train, n_dev, n_test] =
            split_sizes(rows.size(), spec.test_fraction, spec.dev_fraction_of_train);
        auto it = rows.begin();
        test.insert(test.end(), it, it + static_cast<std::ptrdiff_t>(n_test));
        it += static_cast<std::ptrdiff_t>(n_test);
        dev.insert(dev.end(), it, it + static_cast<std::ptrdiff_t>(n_dev));
        it += static_cast<std::ptrdiff_t>(n_dev);
        train.insert(train.end(), it, it + static_cast<std::ptrdiff_t>(n_train));
    }
    if (col) {
        // Stratum order would otherwise leak into row order.
        rng.shuffle(std::span<std::size_t>(train));
        rng.shuffle(std::span<std::size_t>(dev));
        rng.shuffle(std::span<std::size_t>(test));
    }

    auto make = [&](const IndexList& rows, const char* name) {
        if (rows.empty()) throw InvalidArgument(std::string(name) + " split is empty");
        auto ds = data.subset(rows);
        if (ds.num_events() == 0) throw NumericError(std::string(name) + " split has no events");
        return ds;
    };
    auto tr = make(train, "train");
    auto dv = make(dev, "dev");
    auto te = make(test, "test");
    return Splits{std::move(train), std::move(dev),      std::move(test),
                  std::move(tr),    std::move(dv),       std::move(te)};
}

const SweepEntry& SweepResult::entry(double lambda) const {
    if (lambda == 0) return baseline;
    for (const auto& e : entries)
        if (e.lambda == lambda) return e;
    throw InvalidArgument("no sweep entry for lambda " + std::to_string(lambda));
}

namespace {

SweepEntry run_entry(const SurvivalDataset& train, const SurvivalDataset& dev,
                     const std::optional<FairnessPenalty>& penalty, const TrainConfig& config,
                     const FairnessSettings& fairness) {
    SweepEntry e;
    e.lambda = config.lambda;
    try {
        auto result = fcox::train(train, penalty, config);
        const Vector eta = result.model.linear_predictor(dev.covariates());
        const Vector& t = dev.event_time();
        e.c_index_dev = concordance_index({eta.data(), static_cast<std::size_t>(eta.size())},
                                          {t.data(), static_cast<std::size_t>(t.size())},
                                          dev.event_indicator());
        e.fairness = fairness_scores(result.model, dev, fairness);
        e.final_objective = result.report.loss_trace.back();
        e.iterations = result.report.iterations();
        e.wall_time = result.report.wall_time;
        e.model = std::move(result.model);
    } catch (const Error& ex) {
        e.failed = true;
        e.error = ex.what();
    }
    return e;
}

}  // namespace

SweepResult lambda_sweep(const SurvivalDataset& train, const SurvivalDataset& dev,
                         const FairnessPenalty& penalty, const std::vector<double>& grid,
                         const SweepOptions& options) {
    if (grid.empty()) throw InvalidArgument("lambda grid is empty");
    std::vector<double> lambdas;
    for (double l : grid) {
        if (!(l >= 0) || !std::isfinite(l)) throw InvalidArgument("lambda grid values must be >= 0");
        if (l > 0 && std::find(lambdas.begin(), lambdas.end(), l) == lambdas.end())
            lambdas.push_back(l);
    }

    SweepResult result;
    result.kind = kind_of(penalty);

    auto baseline_config = options.baseline_config;
    baseline_config.lambda = 0.0;
    std::vector<TrainConfig> configs;
    for (double l : lambdas) {
        auto c = options.penalized_config;
        c.lambda = l;
        configs.push_back(c);
    }

    if (options.parallel) {
        auto base = std::async(std::launch::async, run_entry, std::cref(train), std::cref(dev),
                               std::nullopt, baseline_config, std::cref(options.fairness));
        std::vector<std::future<SweepEntry>> futures;
        for (const auto& c : configs)
            futures.push_back(std::async(std::launch::async, run_entry, std::cref(train),
                                         std::cref(dev), std::optional<FairnessPenalty>(penalty),
                                         c, std::cref(options.fairness)));
        result.baseline = base.get();
        for (auto& f : futures) result.entries.push_back(f.get());
    } else {
        result.baseline = run_entry(train, dev, std::nullopt, baseline_config, options.fairness);
        for (const auto& c : configs)
            result.entries.push_back(run_entry(train, dev, penalty, c, options.fairness));
    }
    if (result.baseline.failed)
        throw NumericError("baseline model failed to train: " + result.baseline.error);

    if (!result.entries.empty())
        result.selected_lambda = select_lambda(result, options.max_degradation).lambda;
    std::ostringstream rule;
    rule << "fairest " << to_string(result.kind) << " model with dev C-index >= "
         << (1.0 - options.max_degradation) << " x baseline";
    result.selection_rule = rule.str();
    return result;
}

Selection select_lambda(const SweepResult& sweep, double max_degradation) {
    if (!(max_degradation >= 0 && max_degradation < 1))
        throw InvalidArgument("max_degradation must lie in [0, 1)");
    if (sweep.baseline.failed) throw InvalidArgument("sweep has no usable baseline");
    const double threshold = (1.0 - max_degradation) * sweep.baseline.c_index_dev;
    const SweepEntry* best = nullptr;
    for (const auto& e : sweep.entries) {
        if (e.failed || e.lambda == 0 || e.c_index_dev < threshold) continue;
        const double f = e.fairness.of(sweep.kind);
        if (!best) {
            best = &e;
            continue;
        }
        const double bf = best->fairness.of(sweep.kind);
        if (f < bf || (f == bf && e.lambda > best->lambda)) best = &e;
    }
    if (!best) {
        warn("no fair model within budget; selecting lambda = 0");
        return {0.0, false};
    }
    return {best->lambda, true};
}

std::vector<double> default_lambda_grid() {
    return {0.01, 0.05, 0.1, 0.4, 0.7, 1, 2, 5, 10, 25, 50};
}

}  // namespace fcox
