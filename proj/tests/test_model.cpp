#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pirt/model.hpp"
#include "pirt/model_io.hpp"

using namespace pirt;

namespace {

ItemFeatureMatrix two_feature_matrix(Routing r0 = Routing::Both, Routing r1 = Routing::Both) {
    ItemFeatureMatrix m({"a", "b"}, {r0, r1}, 1);
    return m;
}

} // namespace

TEST_CASE("sigmoid basics") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK_THAT(sigmoid(2.0), Catch::Matchers::WithinAbs(0.8807970779, 1e-9));
    CHECK_THAT(sigmoid(3.7) + sigmoid(-3.7), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK(sigmoid(1000.0) < 1.0);
    CHECK(sigmoid(-1000.0) > 0.0);
}

TEST_CASE("sigmoid complement identity over the clamp range") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-30.0, 30.0);
    for (int i = 0; i < 200; ++i) {
        const double x = unif(rng);
        CHECK_THAT(sigmoid(x) + sigmoid(-x), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("item_beta dot products") {
    auto m = two_feature_matrix();
    ModelParameters p;
    p.kind = ModelKind::Rasch;

    SECTION("zero row") {
        p.beta_weights = {0.3, 0.2};
        CHECK(item_beta(0, m, p) == 0.0);
    }
    SECTION("constructed orthogonality") {
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        p.beta_weights = {0.5, -0.25};
        CHECK(item_beta(0, m, p) == 0.0);
    }
    SECTION("hand dot product") {
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        p.beta_weights = {0.3, 0.2};
        CHECK_THAT(item_beta(0, m, p), Catch::Matchers::WithinAbs(0.7, 1e-15));
    }
    SECTION("disabled beta returns exactly zero") {
        m.set(0, 0, 1.0);
        p.beta_weights = {0.3, 0.2};
        p.beta_enabled = false;
        CHECK(item_beta(0, m, p) == 0.0);
    }
    SECTION("dimension mismatch") {
        p.beta_weights = {0.3};
        CHECK_THROWS_AS(item_beta(0, m, p), ConfigError);
    }
}

TEST_CASE("item_phi") {
    ModelParameters p;
    p.kind = ModelKind::TwoPL;

    SECTION("zero row") {
        auto m = two_feature_matrix();
        p.phi_weights = {0.1, 0.4};
        CHECK(item_phi(0, m, p) == 0.0);
    }
    SECTION("identity projection") {
        ItemFeatureMatrix m({"a"}, {Routing::PhiOnly}, 1);
        m.set(0, 0, 1.0);
        p.phi_weights = {-1.5};
        CHECK(item_phi(0, m, p) == -1.5);
    }
    SECTION("hand dot product") {
        auto m = two_feature_matrix();
        m.set(0, 0, 2.0);
        m.set(0, 1, 1.0);
        p.phi_weights = {0.1, 0.4};
        CHECK_THAT(item_phi(0, m, p), Catch::Matchers::WithinAbs(0.6, 1e-15));
    }
    SECTION("usage error on Rasch") {
        auto m = two_feature_matrix();
        p.kind = ModelKind::Rasch;
        CHECK_THROWS_AS(item_phi(0, m, p), ConfigError);
    }
}

TEST_CASE("predict_proba") {
    ItemFeatureMatrix m({"bias"}, {Routing::Both}, 1);
    m.set(0, 0, 1.0);
    ResponseRecord rec{0, 0, 1};

    SECTION("Rasch with equal ability and difficulty") {
        ModelParameters p;
        p.kind = ModelKind::Rasch;
        p.abilities = {0.8};
        p.beta_weights = {0.8};
        CHECK(predict_proba(rec, m, p) == 0.5);
    }
    SECTION("2PL zero logit") {
        ModelParameters p;
        p.kind = ModelKind::TwoPL;
        p.abilities = {0.0};
        p.beta_weights = {0.0};
        p.phi_weights = {3.1};
        CHECK(predict_proba(rec, m, p) == 0.5);
    }
    SECTION("2PL sigma(1)") {
        ModelParameters p;
        p.kind = ModelKind::TwoPL;
        p.abilities = {1.0};
        p.beta_weights = {1.0};
        p.phi_weights = {2.0};
        CHECK_THAT(predict_proba(rec, m, p), Catch::Matchers::WithinAbs(0.7310585786, 1e-9));
    }
}

TEST_CASE("predict_label tie rule") {
    ItemFeatureMatrix m({"bias"}, {Routing::Both}, 1);
    m.set(0, 0, 1.0);
    ResponseRecord rec{0, 0, 0};
    ModelParameters p;
    p.kind = ModelKind::Rasch;

    p.abilities = {0.0};
    p.beta_weights = {0.0};
    CHECK(predict_label(rec, m, p, 0.5) == 1); // ties go positive

    p.abilities = {2.0};
    p.beta_weights = {0.5};
    CHECK_THAT(predict_proba(rec, m, p), Catch::Matchers::WithinAbs(0.8175744762, 1e-9));
    CHECK(predict_label(rec, m, p) == 1);

    p.abilities = {-0.1};
    p.beta_weights = {0.0};
    CHECK(predict_label(rec, m, p, 0.5) == 0);
}

TEST_CASE("Rasch translation invariance at the logit level") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    ItemFeatureMatrix m({"f0", "f1"}, {Routing::Both, Routing::Both}, 4);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 2; ++k) m.set(j, k, normal(rng));

    ModelParameters p;
    p.kind = ModelKind::Rasch;
    p.abilities = {normal(rng), normal(rng), normal(rng)};
    p.beta_weights = {normal(rng), normal(rng)};

    // Shifting all abilities and all betas by c: with derived betas this means
    // adding c to the ability and c to the item offset through a constant
    // feature; check the direct logit identity instead.
    const double c = 1.37;
    for (std::int32_t i = 0; i < 3; ++i)
        for (std::int32_t j = 0; j < 4; ++j) {
            ResponseRecord rec{i, j, 1};
            const double base = predict_logit(rec, m, p);
            ModelParameters shifted = p;
            for (double& a : shifted.abilities) a += c;
            const double beta = item_beta(static_cast<std::size_t>(j), m, p);
            // logit with shifted ability and shifted beta
            const double shifted_logit =
                shifted.abilities[static_cast<std::size_t>(i)] - (beta + c);
            CHECK_THAT(shifted_logit, Catch::Matchers::WithinAbs(base, 1e-12));
        }
}

TEST_CASE("2PL reflection invariance") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    ItemFeatureMatrix m({"f0", "f1", "f2"}, {Routing::Both, Routing::PhiOnly, Routing::BetaOnly}, 5);
    for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t k = 0; k < 3; ++k) m.set(j, k, normal(rng));

    ModelParameters p;
    p.kind = ModelKind::TwoPL;
    p.abilities = {normal(rng), normal(rng)};
    p.beta_weights = {normal(rng), normal(rng)};
    p.phi_weights = {normal(rng), normal(rng)};

    ModelParameters reflected = p;
    for (double& a : reflected.abilities) a = -a;
    for (double& v : reflected.phi_weights) v = -v;

    for (std::int32_t i = 0; i < 2; ++i)
        for (std::int32_t j = 0; j < 5; ++j) {
            ResponseRecord rec{i, j, 0};
            CHECK(predict_proba(rec, m, p) == predict_proba(rec, m, reflected));
        }
}

TEST_CASE("monotonicity in ability and difficulty") {
    ItemFeatureMatrix m({"f"}, {Routing::Both}, 1);
    m.set(0, 0, 1.0);
    ModelParameters p;
    p.kind = ModelKind::Rasch;
    p.beta_weights = {0.4};
    double prev = 0.0;
    for (int step = 0; step < 20; ++step) {
        p.abilities = {-2.0 + 0.2 * step};
        const double cur = predict_proba({0, 0, 1}, m, p);
        if (step > 0) CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("beta disabled makes predictions independent of beta weights") {
    ItemFeatureMatrix m({"f0", "f1"}, {Routing::Both, Routing::Both}, 2);
    m.set(0, 0, 1.2);
    m.set(0, 1, -0.3);
    m.set(1, 0, 0.5);
    m.set(1, 1, 2.0);
    ModelParameters p;
    p.kind = ModelKind::TwoPL;
    p.beta_enabled = false;
    p.abilities = {0.7};
    p.beta_weights = {1.0, -1.0};
    p.phi_weights = {0.2, 0.4};

    ModelParameters perturbed = p;
    perturbed.beta_weights = {42.0, -17.0};
    for (std::int32_t j = 0; j < 2; ++j) {
        ResponseRecord rec{0, j, 1};
        CHECK(predict_proba(rec, m, p) == predict_proba(rec, m, perturbed));
    }
}

TEST_CASE("model persistence round-trips predictions") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    FittedModel model;
    model.params.kind = ModelKind::TwoPL;
    model.params.beta_enabled = true;
    model.feature_names = {"f0", "f1", "f2"};
    model.routing = {Routing::Both, Routing::PhiOnly, Routing::BetaOnly};
    model.params.beta_weights = {normal(rng), normal(rng)};
    model.params.phi_weights = {normal(rng), normal(rng)};
    for (int i = 0; i < 6; ++i) {
        model.respondent_ids.push_back("resp" + std::to_string(i));
        model.params.abilities.push_back(normal(rng));
    }
    model.standardization["f0"] = {0.25, 1.75};
    model.rebuild_index();

    const auto j = model_to_json(model);
    const FittedModel loaded = model_from_json(nlohmann::json::parse(j.dump()));

    ItemFeatureMatrix m(model.feature_names, model.routing, 3);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 3; ++k) m.set(r, k, normal(rng));

    ModelParameters reordered = loaded.params;
    // align loaded abilities back to original respondent order
    for (std::size_t i = 0; i < model.respondent_ids.size(); ++i)
        reordered.abilities[i] = loaded.ability_for(model.respondent_ids[i]);

    for (std::int32_t i = 0; i < 6; ++i)
        for (std::int32_t jx = 0; jx < 3; ++jx) {
            ResponseRecord rec{i, jx, 1};
            CHECK(predict_proba(rec, m, model.params) == predict_proba(rec, m, reordered));
        }
    CHECK(loaded.standardization.at("f0").mean == 0.25);
    CHECK(loaded.standardization.at("f0").std == 1.75);
}
