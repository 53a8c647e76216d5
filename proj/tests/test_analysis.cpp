#include <catch_amalgamated.hpp>

#include <random>

#include "pirt/analysis.hpp"

using namespace pirt;

TEST_CASE("pearson") {
    std::vector<double> x = {1.0, 2.0, 3.0};
    SECTION("identity") {
        CHECK_THAT(pearson(x, x), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("perfect negative linear map") {
        std::vector<double> y;
        for (double v : x) y.push_back(-2.0 * v + 7.0);
        CHECK_THAT(pearson(x, y), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    }
    SECTION("hand computation") {
        std::vector<double> y = {1.0, 2.0, 4.0};
        CHECK_THAT(pearson(x, y), Catch::Matchers::WithinAbs(0.9819805061, 1e-9));
    }
    SECTION("errors") {
        std::vector<double> constant = {2.0, 2.0, 2.0};
        CHECK_THROWS_AS(pearson(x, constant), DataError);
        std::vector<double> two = {1.0, 2.0};
        CHECK_THROWS_AS(pearson(two, two), DataError);
    }
}

TEST_CASE("pearson linear-map and symmetry properties") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 20; ++i) {
            x.push_back(normal(rng));
            y.push_back(normal(rng));
        }
        const double a = normal(rng);
        if (std::abs(a) < 1e-3) continue;
        std::vector<double> mapped;
        for (double v : x) mapped.push_back(a * v + 3.0);
        CHECK_THAT(pearson(x, mapped), Catch::Matchers::WithinAbs(a > 0 ? 1.0 : -1.0, 1e-9));
        CHECK_THAT(pearson(x, y), Catch::Matchers::WithinAbs(pearson(y, x), 1e-12));
    }
}

TEST_CASE("pearson p-value sanity") {
    // r = 0.9819805061 at n = 3 -> p just above 0.1; strong r at large n -> tiny p
    std::vector<double> x = {1.0, 2.0, 3.0}, y = {1.0, 2.0, 4.0};
    const double r = pearson(x, y);
    const double p = pearson_p_value(r, 3);
    CHECK(p > 0.0);
    CHECK(p < 0.25);
    CHECK(pearson_p_value(0.9, 100) < 1e-10);
    CHECK_THAT(pearson_p_value(0.0, 50), Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("export_abilities") {
    ModelParameters params;
    params.abilities = {0.2, -0.1, 0.4};
    const std::vector<std::string> ids = {"a", "b", "c"};
    const auto rows = export_abilities(params, ids);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].respondent_id == "c");
    CHECK(rows[1].respondent_id == "a");
    CHECK(rows[2].respondent_id == "b");
    CHECK(rows[0].ability == 0.4);

    const std::string csv = abilities_to_csv(rows);
    CHECK(csv.find("respondent_id,ability") == 0);
}

TEST_CASE("sign_align") {
    std::vector<double> fitted = {0.5, -1.0, 2.0, 0.1};
    SECTION("reference equals fitted: unchanged") {
        CHECK(sign_align(fitted, fitted) == fitted);
    }
    SECTION("reference equals negated fitted: negated") {
        std::vector<double> negated;
        for (double v : fitted) negated.push_back(-v);
        CHECK(sign_align(fitted, negated) == negated);
    }
    SECTION("noisy negation chooses the negated branch") {
        std::mt19937_64 rng(43);
        std::normal_distribution<double> noise(0.0, 0.05);
        std::vector<double> reference;
        for (double v : fitted) reference.push_back(-v + noise(rng));
        const auto aligned = sign_align(fitted, reference);
        CHECK(pearson(aligned, reference) >= 0.0);
        CHECK(aligned[0] == -fitted[0]);
    }
    SECTION("idempotent composition") {
        std::vector<double> reference = {-0.5, 1.0, -2.0, -0.1};
        const auto once = sign_align(fitted, reference);
        CHECK(sign_align(once, reference) == once);
    }
}

namespace {

FittedModel two_pl_model() {
    FittedModel model;
    model.params.kind = ModelKind::TwoPL;
    model.feature_names = {"style", "org=A", "quality_mean"};
    model.routing = {Routing::Both, Routing::BetaOnly, Routing::PhiOnly};
    model.params.beta_weights = {0.0, 0.0};
    model.params.phi_weights = {0.0, 0.0};
    model.respondent_ids = {"r0"};
    model.params.abilities = {0.0};
    model.rebuild_index();
    return model;
}

} // namespace

TEST_CASE("weight_report") {
    SECTION("zero-initialized weights give all-zero rows") {
        const auto rows = weight_report(two_pl_model());
        REQUIRE(rows.size() == 3);
        for (const auto& r : rows) {
            CHECK(r.beta_weight == 0.0);
            CHECK(r.phi_weight == 0.0);
        }
    }
    SECTION("cells populated iff routing permits") {
        const auto rows = weight_report(two_pl_model());
        CHECK(rows[0].has_beta);
        CHECK(rows[0].has_phi);
        CHECK(rows[1].has_beta);
        CHECK_FALSE(rows[1].has_phi);
        CHECK_FALSE(rows[2].has_beta);
        CHECK(rows[2].has_phi);
    }
    SECTION("top-k with k = feature count returns all surviving rows") {
        auto model = two_pl_model();
        model.params.beta_weights = {1.0, -2.0};
        const auto rows = weight_report(model);
        const auto top = top_weights(rows, false, rows.size(), true, 0.0);
        CHECK(top.size() == 2); // only beta-routed rows qualify
    }
    SECTION("small-magnitude filter") {
        auto model = two_pl_model();
        model.params.beta_weights = {1.0, 0.001};
        const auto rows = weight_report(model);
        const auto top = top_weights(rows, false, 10, true, 0.01);
        CHECK(top.size() == 1);
        CHECK(top[0].feature_name == "style");
    }
    SECTION("Rasch model leaves phi cells empty") {
        FittedModel model;
        model.params.kind = ModelKind::Rasch;
        model.feature_names = {"f0"};
        model.routing = {Routing::Both};
        model.params.beta_weights = {0.3};
        const auto rows = weight_report(model);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].has_beta);
        CHECK_FALSE(rows[0].has_phi);
    }
}

TEST_CASE("weights CSV") {
    auto model = two_pl_model();
    model.params.beta_weights = {0.25, -1.5};
    model.params.phi_weights = {0.75, 0.5};
    const std::string csv = weights_to_csv(weight_report(model));
    CHECK(csv.find("feature_name,beta_weight,phi_weight") == 0);
    CHECK(csv.find("org=A,-1.5,") != std::string::npos);
    CHECK(csv.find("quality_mean,,0.5") != std::string::npos);
}
