#include "../support/oracles.hpp"

#include "fcox/data_io.hpp"
#include "fcox/error.hpp"
#include "fcox/survival.hpp"

#include <doctest.h>

#include <cmath>

using namespace fcox;
using oracle::make_dataset;

namespace {

Matrix column(std::initializer_list<double> v) {
    Matrix X(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) X(i++, 0) = x;
    return X;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("relative_hazard examples") {
    auto zero = CoxModel::with_identity_scaling(Vector::Zero(2));
    CHECK(relative_hazard(zero, vec({3.0, -7.0})) == 1.0);

    auto m = CoxModel::with_identity_scaling(vec({std::log(2.0), 0.0}));
    CHECK(relative_hazard(m, vec({1.0, 5.0})) == doctest::Approx(2.0).epsilon(1e-15));

    auto m2 = CoxModel::with_identity_scaling(vec({0.3, -0.2}));
    CHECK(relative_hazard(m2, vec({1.5, 2.0})) == doctest::Approx(std::exp(0.05)).epsilon(1e-14));
}

TEST_CASE("relative_hazard standardizes inside") {
    CoxModel m;
    m.beta = vec({1.0});
    m.feature_means = vec({10.0});
    m.feature_scales = vec({2.0});
    m.feature_names = {"x"};
    CHECK(relative_hazard(m, vec({12.0})) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("relative_hazard rejects bad input") {
    auto m = CoxModel::with_identity_scaling(vec({1.0, 2.0}));
    CHECK_THROWS_AS(relative_hazard(m, vec({1.0})), InvalidArgument);
    CHECK_THROWS_AS(relative_hazard(m, vec({1.0, NAN})), InvalidArgument);
}

TEST_CASE("risk_set examples") {
    auto d = make_dataset(column({0, 0, 0}), {5, 3, 8}, {true, true, true});
    CHECK(risk_set(d, 4) == IndexList{0, 2});
    CHECK(risk_set(d, 0) == IndexList{0, 1, 2});
    auto tied = make_dataset(column({0, 0, 0}), {5, 5, 5}, {true, false, true});
    CHECK(risk_set(tied, 5) == IndexList{0, 1, 2});
    CHECK_THROWS_AS(risk_set(d, -1), InvalidArgument);
}

TEST_CASE("risk_set is monotone in t") {
    Rng rng(4);
    auto inst = oracle::random_instance(rng, 40, 1, 0.3, true);
    auto d = make_dataset(inst.X, inst.times, inst.events);
    for (double t1 = 0; t1 <= 11; t1 += 0.5) {
        const auto a = risk_set(d, t1);
        const auto b = risk_set(d, t1 + 0.5);
        CHECK(std::includes(a.begin(), a.end(), b.begin(), b.end()));
    }
}

TEST_CASE("partial likelihood at beta zero is a sum of log risk-set sizes") {
    auto d = make_dataset(column({0.4, -1.0, 2.0}), {3, 1, 2}, {true, true, true});
    auto m = CoxModel::with_identity_scaling(Vector::Zero(1));
    CHECK(neg_log_partial_likelihood(m, d, false) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
    CHECK(neg_log_partial_likelihood(m, d, true) ==
          doctest::Approx(std::log(6.0) / 3).epsilon(1e-14));
}

TEST_CASE("two-subject partial likelihood") {
    auto d = make_dataset(column({1.0, 0.0}), {1, 2}, {true, true});
    auto m = CoxModel::with_identity_scaling(vec({1.0}));
    const double expected = std::log(std::exp(1.0) + 1) - 1;
    CHECK(neg_log_partial_likelihood(m, d, false) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(0.31326).epsilon(1e-5));
}

TEST_CASE("all-censored data has no events") {
    auto d = make_dataset(column({1, 2}), {1, 2}, {false, false});
    auto m = CoxModel::with_identity_scaling(vec({1.0}));
    CHECK_THROWS_WITH_AS(neg_log_partial_likelihood(m, d, true), "no events", NumericError);
    CHECK_THROWS_AS(neg_log_partial_likelihood_gradient(m, d), NumericError);
    CHECK_THROWS_AS(breslow_baseline(m, d), NumericError);
}

TEST_CASE("partial likelihood matches the brute-force product") {
    Rng rng(11);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + rng.below(5);
        auto inst = oracle::random_instance(rng, n, 3, 0.3);
        inst.events[0] = true;
        auto d = make_dataset(inst.X, inst.times, inst.events);
        Vector beta(3);
        for (int k = 0; k < 3; ++k) beta[k] = rng.normal();
        auto m = CoxModel::with_identity_scaling(beta);
        const double product = oracle::partial_likelihood_product(m.linear_predictor(inst.X),
                                                                  d.event_time(), inst.events);
        const double ours = std::exp(-neg_log_partial_likelihood(m, d, false));
        CHECK(std::abs(ours - product) / product <= 1e-10);
    }
}

TEST_CASE("Breslow ties share the full risk set") {
    // events at 5 (x2) with 4 subjects at risk; product counts each tied event once
    auto d = make_dataset(column({0.5, -0.3, 1.2, 0.1}), {5, 5, 7, 9}, {true, true, false, true});
    auto m = CoxModel::with_identity_scaling(vec({0.7}));
    const Vector eta = m.linear_predictor(d.covariates());
    const double product = oracle::partial_likelihood_product(eta, d.event_time(), d.event_indicator());
    CHECK(std::exp(-neg_log_partial_likelihood(m, d, false)) == doctest::Approx(product).epsilon(1e-12));
}

TEST_CASE("partial likelihood invariant to shifting all times") {
    Rng rng(2);
    auto inst = oracle::random_instance(rng, 30, 2, 0.3, true);
    inst.events[0] = true;
    auto a = make_dataset(inst.X, inst.times, inst.events);
    for (auto& t : inst.times) t += 100.0;
    auto b = make_dataset(inst.X, inst.times, inst.events);
    auto m = CoxModel::with_identity_scaling(vec({0.4, -1.1}));
    CHECK(neg_log_partial_likelihood(m, a, true) == neg_log_partial_likelihood(m, b, true));
}

TEST_CASE("partial likelihood stays finite for large linear predictors") {
    auto d = make_dataset(column({500.0, -500.0, 250.0, 0.0}), {1, 2, 3, 4}, {true, true, true, true});
    auto up = CoxModel::with_identity_scaling(vec({1.0}));
    auto down = CoxModel::with_identity_scaling(vec({-1.0}));
    CHECK(std::isfinite(neg_log_partial_likelihood(up, d, false)));
    CHECK(std::isfinite(neg_log_partial_likelihood(down, d, false)));
    CHECK(neg_log_partial_likelihood_gradient(down, d).allFinite());
}

TEST_CASE("gradient matches central differences") {
    Rng rng(5);
    SyntheticSpec spec;
    spec.n = 20;
    spec.beta_true = {0.5, -0.4, 0.2};
    spec.seed = 3;
    const auto data = generate_synthetic(spec);
    const auto base = CoxModel::fit_standardization(data);
    for (int rep = 0; rep < 10; ++rep) {
        CoxModel m = base;
        for (Eigen::Index k = 0; k < 3; ++k) m.beta[k] = rng.normal();
        auto f = [&](const Vector& b) {
            CoxModel mm = m;
            mm.beta = b;
            return neg_log_partial_likelihood(mm, data, true);
        };
        const Vector fd = oracle::central_difference(f, m.beta);
        const Vector g = neg_log_partial_likelihood_gradient(m, data, true);
        CHECK(oracle::relative_error(g, fd) <= 1e-5);
    }
}

TEST_CASE("gradient special cases") {
    // beta = 0, one event whose risk set is everyone
    auto d = make_dataset(column({1.0, 2.0, 6.0}), {1, 2, 3}, {true, false, false});
    auto m = CoxModel::with_identity_scaling(Vector::Zero(1));
    CHECK(neg_log_partial_likelihood_gradient(m, d, false)[0] == doctest::Approx(3.0 - 1.0));

    auto single = make_dataset(column({4.2}), {7}, {true});
    auto m1 = CoxModel::with_identity_scaling(vec({0.9}));
    CHECK(neg_log_partial_likelihood_gradient(m1, single)[0] == 0.0);
}

TEST_CASE("Breslow baseline examples") {
    auto m = CoxModel::with_identity_scaling(Vector::Zero(1));
    auto d = make_dataset(column({0, 1, 2, 3}), {1, 2, 3, 4}, {true, true, true, true});
    const auto h = breslow_baseline(m, d);
    REQUIRE(h.times == std::vector<double>{1, 2, 3, 4});
    const std::vector<double> expected{0.25, 0.25 + 1.0 / 3, 0.25 + 1.0 / 3 + 0.5,
                                       0.25 + 1.0 / 3 + 0.5 + 1.0};
    for (std::size_t k = 0; k < 4; ++k) CHECK(h.cumulative[k] == doctest::Approx(expected[k]).epsilon(1e-14));
    CHECK(h.cumulative.back() == doctest::Approx(25.0 / 12));

    auto tied = make_dataset(column({0, 0, 0, 0}), {5, 5, 6, 8}, {true, true, false, false});
    const auto ht = breslow_baseline(m, tied);
    REQUIRE(ht.times.size() == 1);
    CHECK(ht.cumulative[0] == 0.5);

    CHECK(h.at(0.5) == 0.0);
    CHECK(h.at(2.5) == h.cumulative[1]);
    CHECK(h.at(100) == h.cumulative.back());
}

TEST_CASE("survival_probability") {
    BaselineHazard h{{2.0, 4.0}, {0.5, 0.9}};
    auto m = CoxModel::with_identity_scaling(vec({std::log(2.0)}));
    CHECK(survival_probability(m, h, vec({1.0}), 1.0) == 1.0);
    CHECK(survival_probability(m, h, vec({1.0}), 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    double prev = 1.0;
    for (double t = 0; t < 6; t += 0.25) {
        const double s = survival_probability(m, h, vec({1.0}), t);
        CHECK(s <= prev);
        CHECK(s > 0.0);
        CHECK(s <= 1.0);
        prev = s;
    }
    CHECK_THROWS_AS(survival_probability(m, h, vec({1.0, 2.0}), 1.0), InvalidArgument);
}

TEST_CASE("dataset validation") {
    CHECK_THROWS_AS(make_dataset(column({1}), {-1}, {true}), InvalidArgument);
    CHECK_THROWS_AS(make_dataset(column({NAN}), {1}, {true}), InvalidArgument);
    CHECK_THROWS_AS(make_dataset(column({1, 2}), {1}, {true}), InvalidArgument);
    CHECK_THROWS_AS(make_dataset(column({1, 2}), {1, 2}, {true, true},
                                 {{"g", ProtectedColumn{{0, 2}, {0, 1}, {"a", "b"}}}}),
                    InvalidArgument);
    auto d = make_dataset(column({1, 2, 3}), {1, 2, 3}, {true, false, true},
                          {{"g", oracle::binary_column({0, 1, 1})}});
    CHECK(d.num_events() == 2);
    CHECK_THROWS_AS(d.protected_column("nope"), InvalidArgument);
    const IndexList rows{2, 0};
    const auto s = d.subset(rows);
    CHECK(s.size() == 2);
    CHECK(s.event_time()[0] == 3);
    CHECK(s.protected_column("g").values == std::vector<int>{1, 0});
}

TEST_CASE("standardization uses population moments and guards constant features") {
    Matrix X(4, 2);
    X << 1, 5, 2, 5, 3, 5, 4, 5;
    auto d = make_dataset(X, {1, 2, 3, 4}, {true, true, true, true});
    WarningCapture w;
    const auto m = CoxModel::fit_standardization(d);
    CHECK(m.feature_means[0] == 2.5);
    CHECK(m.feature_scales[0] == doctest::Approx(std::sqrt(1.25)));
    CHECK(m.feature_scales[1] == 1.0);
    CHECK(w.contains("constant"));
}
