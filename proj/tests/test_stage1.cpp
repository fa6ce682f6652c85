#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "rankforge/linalg.hpp"
#include "rankforge/stage1.hpp"
#include "support.hpp"

using namespace rankforge;
using namespace rankforge::testing;

TEST_CASE("two arms without covariates reduce to a difference in means") {
    IPDDataset d;
    d.treatments = TreatmentSet({"A", "B"});
    const std::vector<double> y1{1.0, 2.0, 4.0, 3.5};
    const std::vector<double> y2{5.0, 4.0, 6.5};
    for (double y : y1) d.records.push_back({"S", 1, y, {}, 0});
    for (double y : y2) d.records.push_back({"S", 2, y, {}, 0});
    const auto fit = fit_study(d.records, d.schema);

    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
    double ss = 0.0;
    for (double y : y1) ss += (y - mean(y1)) * (y - mean(y1));
    for (double y : y2) ss += (y - mean(y2)) * (y - mean(y2));
    const double s2 = ss / static_cast<double>(y1.size() + y2.size() - 2);

    CHECK(fit.reference == 1);
    CHECK(fit.layout.treatments == std::vector<int>{2});
    CHECK(fit.estimate[0] == doctest::Approx(mean(y2) - mean(y1)).epsilon(1e-12));
    CHECK(std::abs(fit.covariance(0, 0) - s2 * (1.0 / 4 + 1.0 / 3)) <= 1e-10);
    CHECK(fit.residual_variance == doctest::Approx(s2).epsilon(1e-12));
}

TEST_CASE("stage-1 coefficients match a brute-force normal-equations solve") {
    const auto d = three_arm_study(1, 20, 42);  // 60 records
    const auto fit = fit_study(d.records, d.schema);
    const auto oracle = brute_force_fit(d.records, 1, 1);
    REQUIRE(fit.estimate.size() == 4);
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(std::abs(fit.estimate[i] - oracle.delta[static_cast<std::size_t>(i)]) <= 1e-8);
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK(std::abs(fit.covariance(i, j) - oracle.cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) <= 1e-8);
        }
    }
    CHECK(asymmetry(fit.covariance) <= 1e-10);
    CHECK(fit.layout.coefficients == std::vector<std::string>{"main", "x1"});
    CHECK(fit.layout.treatments == std::vector<int>{2, 3});
}

TEST_CASE("stage-1 estimates are translation invariant") {
    auto d = three_arm_study(2, 30, 7);
    const auto before = fit_study(d.records, d.schema);
    for (auto& r : d.records) r.outcome += 17.0;
    const auto after = fit_study(d.records, d.schema);
    CHECK((before.estimate - after.estimate).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("explicit reference arm re-expresses the contrasts") {
    const auto d = three_arm_study(1, 25, 5);
    const auto fit = fit_study(d.records, d.schema, Stage1Options{3});
    const auto oracle = brute_force_fit(d.records, 1, 3);
    CHECK(fit.reference == 3);
    CHECK(fit.layout.treatments == std::vector<int>{1, 2});
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(fit.estimate[i] - oracle.delta[static_cast<std::size_t>(i)]) <= 1e-8);
    CHECK_THROWS_AS(fit_study(d.records, d.schema, Stage1Options{7}), ValidationError);
}

TEST_CASE("rank-deficient designs name the offending columns") {
    auto d = three_arm_study(1, 10, 9);
    for (auto& r : d.records) r.covariates[0] = 2.5;  // constant within the study
    try {
        fit_study(d.records, d.schema);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string what = e.what();
        CHECK(what.find("rank-deficient") != std::string::npos);
        CHECK(what.find("prognostic x1") != std::string::npos);
        CHECK(what.find("treatment #2 x x1") != std::string::npos);
    }
}

TEST_CASE("too few observations for the design is an error") {
    const auto d = three_arm_study(2, 3, 1);  // 9 records, 12 columns
    CHECK_THROWS_WITH_AS(fit_study(d.records, d.schema), doctest::Contains("need more observations"), NumericError);
}

TEST_CASE("fit_all_studies shapes, ordering and error aggregation") {
    TruthSpec truth;
    truth.psi = {{0, 0}, {1, 0.5}, {2, -0.5}};
    truth.prognostic = {1.0};
    const auto schema = continuous_schema(1);
    auto d = simulate(TreatmentSet({"A", "B", "C"}), schema,
                      {{"s3", {2, 3}, 20, 0}, {"s1", {1, 2, 3}, 20, 0}, {"s2", {1, 3}, 20, 0}}, truth, 3);
    const auto fits = fit_all_studies(d);
    REQUIRE(fits.size() == 3);
    CHECK(fits[0].study == "s1");
    CHECK(fits[0].layout.treatments == std::vector<int>{2, 3});
    CHECK(fits[1].layout.treatments == std::vector<int>{3});
    CHECK(fits[2].reference == 2);
    CHECK(fits[2].estimate.size() == 2);

    SUBCASE("record permutation within studies leaves estimates unchanged") {
        auto shuffled = d;
        std::mt19937_64 rng(99);
        std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
        const auto again = fit_all_studies(shuffled);
        for (std::size_t i = 0; i < fits.size(); ++i) {
            CHECK((fits[i].estimate - again[i].estimate).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((fits[i].covariance - again[i].covariance).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    SUBCASE("one rank-deficient study produces one aggregated error naming it") {
        for (auto& r : d.records)
            if (r.study == "s2") r.covariates[0] = 1.0;
        try {
            fit_all_studies(d);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            const std::string what = e.what();
            CHECK(what.find("1 study fit(s) failed") != std::string::npos);
            CHECK(what.find("study 's2'") != std::string::npos);
            CHECK(what.find("study 's1'") == std::string::npos);
        }
    }
}

TEST_CASE("cholesky_with_jitter repairs near-singular matrices within bounds") {
    Eigen::Matrix2d singular;
    singular << 1.0, 1.0, 1.0, 1.0;
    const auto repaired = cholesky_with_jitter(singular, "test");
    CHECK(repaired.jitter > 0.0);
    CHECK(repaired.jitter <= 1e-6);

    Eigen::Matrix2d indefinite;
    indefinite << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(cholesky_with_jitter(indefinite, "test"), NumericError);

    const auto clean = cholesky_with_jitter(Eigen::Matrix2d::Identity(), "test");
    CHECK(clean.jitter == 0.0);
}
