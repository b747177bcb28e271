#include "../support/oracles.hpp"

#include "fcox/data_io.hpp"
#include "fcox/error.hpp"
#include "fcox/fairness.hpp"

#include <doctest.h>

#include <cmath>

using namespace fcox;

namespace {

SurvivalDataset biased_data(std::size_t n, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n = n;
    spec.beta_true = {0.6, -0.4, 0.3};
    spec.group_bias = {{1, 2.0}};
    spec.group_feature_shift = 1.0;
    spec.seed = seed;
    return generate_synthetic(spec);
}

Vector random_beta(Rng& rng, Eigen::Index p) {
    Vector b(p);
    for (Eigen::Index k = 0; k < p; ++k) b[k] = rng.normal() * 0.5;
    return b;
}

std::vector<FairnessPenalty> all_penalties(const SurvivalDataset& data) {
    return {IndividualPenalty{1.0}, GroupPenalty{"group", 1},
            IntersectionalPenalty{ProtectedSpace::from_dataset(data, {"group", "sex"})}};
}

}  // namespace

TEST_CASE("all measures vanish at beta zero") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto data = biased_data(60, seed);
        auto m = CoxModel::fit_standardization(data);
        CHECK(individual_fairness(m, data.covariates(), 1.0) == 0.0);
        CHECK(group_fairness(m, data, "group") == 0.0);
        CHECK(group_fairness(m, data, "sex") == 0.0);
        const auto space = ProtectedSpace::from_dataset(data, {"group", "sex"});
        CHECK(intersectional_fairness(m, data, space) == 0.0);
        for (const auto& p : all_penalties(data)) {
            const auto e = penalty_value_and_subgradient(p, m, data);
            CHECK(e.value == 0.0);
            CHECK(e.subgradient.allFinite());
        }
    }
}

TEST_CASE("individual fairness hand example") {
    Matrix X(2, 1);
    X << 0, 1;
    auto m = CoxModel::with_identity_scaling(Vector::Constant(1, 2.0));
    CHECK(individual_fairness(m, X, 1.0) ==
          doctest::Approx(std::exp(2.0) - 2.0).epsilon(1e-14));

    Matrix same(2, 1);
    same << 0.3, 0.3;
    CHECK(individual_fairness(m, same, 1.0) == 0.0);
}

TEST_CASE("individual fairness with an inactive hinge has zero subgradient") {
    Matrix X(2, 1);
    X << 0, 1;
    auto m = CoxModel::with_identity_scaling(Vector::Constant(1, 0.1));
    auto d = oracle::make_dataset(X, {1, 2}, {true, true});
    const auto e = penalty_value_and_subgradient(IndividualPenalty{1.0}, m, d);
    CHECK(e.value == 0.0);
    CHECK(e.subgradient[0] == 0.0);
}

TEST_CASE("individual fairness with fewer than two rows warns") {
    Matrix X(1, 1);
    X << 1;
    auto m = CoxModel::with_identity_scaling(Vector::Constant(1, 2.0));
    WarningCapture w;
    CHECK(individual_fairness(m, X, 1.0) == 0.0);
    CHECK(w.contains("at least two"));
    CHECK_THROWS_AS(individual_fairness(m, X, 0.0), InvalidArgument);
}

TEST_CASE("group kernel hand examples") {
    const Matrix X = Matrix::Zero(3, 1);
    const auto col = oracle::binary_column({0, 0, 1});
    Vector h(3);
    h << 1, 3, 2;
    CHECK(detail::group_kernel(X, h, col, 1, false).value == 0.0);
    h << 1, 1, 4;
    CHECK(detail::group_kernel(X, h, col, 1, false).value == 2.0);
}

TEST_CASE("group fairness with one group is zero") {
    const auto data = biased_data(40, 9);
    auto m = CoxModel::fit_standardization(data);
    m.beta << 0.5, -1.0, 0.2;
    std::map<std::string, ProtectedColumn> prot{
        {"all", ProtectedColumn{std::vector<int>(data.size(), 0), {0}, {"everyone"}}}};
    SurvivalDataset one(data.covariates(), data.event_time(), data.event_indicator(), prot,
                        data.feature_names());
    CHECK(group_fairness(m, one, "all") == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(group_fairness(m, one, "missing"), InvalidArgument);
}

TEST_CASE("group fairness skips small groups and fails when all are skipped") {
    const Matrix X = Matrix::Zero(3, 1);
    auto d = oracle::make_dataset(X, {1, 2, 3}, {true, true, true},
                                  {{"g", oracle::binary_column({0, 0, 1})}});
    auto m = CoxModel::with_identity_scaling(Vector::Zero(1));
    WarningCapture w;
    CHECK(group_fairness(m, d, "g", 2) == 0.0);
    CHECK(w.contains("group '1'"));
    CHECK_THROWS_AS(group_fairness(m, d, "g", 5), NumericError);
}

TEST_CASE("intersectional kernel hand examples") {
    const Matrix X = Matrix::Zero(3, 1);
    Vector h(3);
    h << 0.5, 2.0, 1.0;
    const std::vector<std::size_t> sub{0, 1, 2};
    CHECK(detail::intersectional_kernel(X, h, sub, 3, 1, false).value ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
    Vector h2(2);
    h2 << 1.0, std::exp(1.0);
    CHECK(detail::intersectional_kernel(Matrix::Zero(2, 1), h2, {0, 1}, 2, 1, false).value ==
          doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("intersectional fairness needs two populated subgroups") {
    const Matrix X = Matrix::Zero(3, 1);
    auto d = oracle::make_dataset(X, {1, 2, 3}, {true, true, true},
                                  {{"g", oracle::binary_column({0, 0, 0})}});
    auto m = CoxModel::with_identity_scaling(Vector::Zero(1));
    const auto space = ProtectedSpace::from_dataset(d, {"g"});
    CHECK_THROWS_AS(intersectional_fairness(m, d, space), NumericError);
}

TEST_CASE("protected space is the lexicographic cross product") {
    const auto data = biased_data(30, 1);
    const auto s = ProtectedSpace::from_dataset(data, {"group", "sex"}, 2);
    CHECK(s.subgroups == std::vector<std::vector<int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    CHECK(s.min_subgroup_count == 2);
    auto bad = s;
    bad.subgroups.pop_back();
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK_THROWS_AS(ProtectedSpace::from_dataset(data, {"group"}, 0), InvalidArgument);
    CHECK_THROWS_AS(ProtectedSpace::from_dataset(data, {"nope"}), InvalidArgument);
}

TEST_CASE("penalty subgradients match central differences at smooth points") {
    const auto data = biased_data(20, 4);
    const auto base = CoxModel::fit_standardization(data);
    Rng rng(8);
    for (const auto& penalty : all_penalties(data)) {
        for (int rep = 0; rep < 10; ++rep) {
            CoxModel m = base;
            m.beta = random_beta(rng, 3);
            auto f = [&](const Vector& b) {
                CoxModel mm = m;
                mm.beta = b;
                return penalty_value_and_subgradient(penalty, mm, data).value;
            };
            const auto e = penalty_value_and_subgradient(penalty, m, data);
            CHECK(e.value == doctest::Approx(f(m.beta)));
            const Vector fd = oracle::central_difference(f, m.beta);
            CHECK_MESSAGE(oracle::relative_error(e.subgradient, fd) <= 1e-4,
                          to_string(kind_of(penalty)));
        }
    }
}

TEST_CASE("penalty values agree with the evaluation measures") {
    const auto data = biased_data(50, 6);
    auto m = CoxModel::fit_standardization(data);
    m.beta << 0.3, 0.2, -0.5;
    const auto space = ProtectedSpace::from_dataset(data, {"group", "sex"});
    CHECK(penalty_value_and_subgradient(IndividualPenalty{0.5}, m, data).value ==
          individual_fairness(m, data.covariates(), 0.5));
    CHECK(penalty_value_and_subgradient(GroupPenalty{"sex"}, m, data).value ==
          group_fairness(m, data, "sex"));
    CHECK(penalty_value_and_subgradient(IntersectionalPenalty{space}, m, data).value ==
          intersectional_fairness(m, data, space));
}

TEST_CASE("fairness properties") {
    const auto data = biased_data(40, 12);
    auto m = CoxModel::fit_standardization(data);
    m.beta << 0.8, -0.3, 0.4;

    SUBCASE("group and intersectional measures are invariant to duplicating the data") {
        IndexList twice;
        for (int r = 0; r < 2; ++r)
            for (std::size_t i = 0; i < data.size(); ++i) twice.push_back(i);
        const auto dup = data.subset(twice);
        CHECK(group_fairness(m, dup, "group") == doctest::Approx(group_fairness(m, data, "group")).epsilon(1e-13));
        const auto s1 = ProtectedSpace::from_dataset(data, {"group", "sex"});
        CHECK(intersectional_fairness(m, dup, s1) ==
              doctest::Approx(intersectional_fairness(m, data, s1)).epsilon(1e-13));
    }
    SUBCASE("intersectional measure ignores subgroup enumeration order") {
        const auto a = ProtectedSpace::from_dataset(data, {"group", "sex"});
        const auto b = ProtectedSpace::from_dataset(data, {"sex", "group"});
        CHECK(intersectional_fairness(m, data, a) ==
              doctest::Approx(intersectional_fairness(m, data, b)).epsilon(1e-14));
    }
    SUBCASE("individual measure is invariant to row permutation") {
        Rng rng(3);
        const auto perm = rng.permutation(data.size());
        const auto shuffled = data.subset(perm);
        CHECK(individual_fairness(m, shuffled.covariates(), 1.0) ==
              doctest::Approx(individual_fairness(m, data.covariates(), 1.0)).epsilon(1e-12));
    }
    SUBCASE("individual measure is nonincreasing in distance_scale") {
        double prev = individual_fairness(m, data.covariates(), 0.01);
        for (double s : {0.1, 0.5, 1.0, 2.0, 5.0, 50.0}) {
            const double v = individual_fairness(m, data.covariates(), s);
            CHECK(v <= prev);
            prev = v;
        }
    }
    SUBCASE("single binary attribute: group and intersectional vanish together") {
        const auto space = ProtectedSpace::from_dataset(data, {"group"});
        CHECK(intersectional_fairness(m, data, space) > 0);
        CHECK(group_fairness(m, data, "group") > 0);

        const Matrix X = Matrix::Zero(3, 1);
        const auto col = oracle::binary_column({0, 0, 1});
        const std::vector<std::size_t> sub{0, 0, 1};
        Vector equal_means(3), unequal(3);
        equal_means << 1, 3, 2;
        unequal << 1, 1, 4;
        CHECK(detail::group_kernel(X, equal_means, col, 1, false).value == 0.0);
        CHECK(detail::intersectional_kernel(X, equal_means, sub, 2, 1, false).value == 0.0);
        CHECK(detail::group_kernel(X, unequal, col, 1, false).value > 0.0);
        CHECK(detail::intersectional_kernel(X, unequal, sub, 2, 1, false).value ==
              doctest::Approx(std::log(4.0)));
    }
    SUBCASE("measures are nonnegative") {
        Rng rng(5);
        for (int rep = 0; rep < 20; ++rep) {
            m.beta = random_beta(rng, 3) * 3;
            CHECK(individual_fairness(m, data.covariates(), 1.0) >= 0);
            CHECK(group_fairness(m, data, "sex") >= 0);
            CHECK(intersectional_fairness(m, data, ProtectedSpace::from_dataset(data, {"group", "sex"})) >= 0);
        }
    }
}

TEST_CASE("penalty kind names") {
    CHECK(parse_penalty_kind("individual") == PenaltyKind::individual);
    CHECK(std::string(to_string(PenaltyKind::intersectional)) == "intersectional");
    CHECK_THROWS_AS(parse_penalty_kind("demographic"), InvalidArgument);
    CHECK(kind_of(GroupPenalty{"g"}) == PenaltyKind::group);
}
