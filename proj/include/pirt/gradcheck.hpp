#ifndef PIRT_GRADCHECK_HPP
#define PIRT_GRADCHECK_HPP

#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "pirt/trainer.hpp"

namespace pirt {

// Central finite difference of the loss over every free parameter. This path
// never touches the analytic gradient code.
inline Gradients numeric_gradients(std::span<const ResponseRecord> records,
                                   const ItemFeatureMatrix& features, const ModelParameters& params,
                                   const TrainConfig& config, double h = 1e-5) {
    Gradients out;
    out.resize_like(params);
    ModelParameters work = params;
    auto diff = [&](std::vector<double>& theta, std::size_t i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = loss(records, features, work, config);
        theta[i] = saved - h;
        const double down = loss(records, features, work, config);
        theta[i] = saved;
        return (up - down) / (2.0 * h);
    };
    for (std::size_t i = 0; i < work.abilities.size(); ++i)
        out.abilities[i] = diff(work.abilities, i);
    if (params.beta_enabled)
        for (std::size_t i = 0; i < work.beta_weights.size(); ++i)
            out.beta_weights[i] = diff(work.beta_weights, i);
    if (params.kind == ModelKind::TwoPL)
        for (std::size_t i = 0; i < work.phi_weights.size(); ++i)
            out.phi_weights[i] = diff(work.phi_weights, i);
    return out;
}

struct GradCheckCase {
    ModelKind kind = ModelKind::Rasch;
    bool beta_enabled = true;
    RegKind reg_kind = RegKind::L2;
    double max_relative_error = 0.0;
};

struct GradCheckOptions {
    int cases_per_kind = 20;
    std::uint64_t seed = 12345;
    double h = 1e-5;
    double tolerance = 1e-5;
    bool rasch_only = false;
    // Test hook: flip the analytic ability gradient so the harness must fail.
    bool inject_sign_fault = false;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double max_relative_error = 0.0;
    bool passed = true;
};

namespace detail {

// Relative error with a unit floor: small gradients compare absolutely.
inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

inline double max_rel_error(const Gradients& a, const Gradients& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.abilities.size(); ++i)
        worst = std::max(worst, rel_error(a.abilities[i], b.abilities[i]));
    for (std::size_t i = 0; i < a.beta_weights.size(); ++i)
        worst = std::max(worst, rel_error(a.beta_weights[i], b.beta_weights[i]));
    for (std::size_t i = 0; i < a.phi_weights.size(); ++i)
        worst = std::max(worst, rel_error(a.phi_weights[i], b.phi_weights[i]));
    return worst;
}

} // namespace detail

// Random small instances per (model kind, beta flag, reg kind) combination;
// analytic vs numeric gradients.
inline GradCheckReport run_gradcheck(const GradCheckOptions& options = {}) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);

    // L1 is non-differentiable at 0; keep parameters away from the kink.
    auto draw_param = [&]() {
        double v = 0.0;
        do {
            v = 0.7 * normal(rng);
        } while (std::abs(v) < 1e-3);
        return v;
    };

    std::vector<std::tuple<ModelKind, bool, RegKind>> combos = {
        {ModelKind::Rasch, true, RegKind::L2},
        {ModelKind::Rasch, true, RegKind::L1},
    };
    if (!options.rasch_only) {
        combos.push_back({ModelKind::TwoPL, true, RegKind::L2});
        combos.push_back({ModelKind::TwoPL, true, RegKind::L1});
        combos.push_back({ModelKind::TwoPL, false, RegKind::L2});
        combos.push_back({ModelKind::TwoPL, false, RegKind::L1});
    }

    GradCheckReport report;
    for (const auto& [kind, beta_enabled, reg_kind] : combos) {
        for (int c = 0; c < options.cases_per_kind; ++c) {
            const std::size_t n_resp = 3 + static_cast<std::size_t>(rng() % 4);
            const std::size_t n_items = 3 + static_cast<std::size_t>(rng() % 4);
            const std::size_t n_feat = 2 + static_cast<std::size_t>(rng() % 3);

            std::vector<std::string> names;
            std::vector<Routing> routing;
            for (std::size_t k = 0; k < n_feat; ++k) {
                names.push_back("f" + std::to_string(k));
                routing.push_back(kind == ModelKind::TwoPL && coin(rng)
                                      ? Routing::PhiOnly
                                      : (coin(rng) ? Routing::Both : Routing::BetaOnly));
            }
            if (kind == ModelKind::TwoPL) routing.back() = Routing::Both; // keep phi non-empty
            ItemFeatureMatrix features(names, routing, n_items);
            for (std::size_t j = 0; j < n_items; ++j)
                for (std::size_t k = 0; k < n_feat; ++k) features.set(j, k, normal(rng));

            ModelParameters params;
            params.kind = kind;
            params.beta_enabled = beta_enabled;
            params.abilities.resize(n_resp);
            for (double& a : params.abilities) a = draw_param();
            params.beta_weights.resize(features.beta_columns().size());
            for (double& w : params.beta_weights) w = draw_param();
            if (kind == ModelKind::TwoPL) {
                params.phi_weights.resize(features.phi_columns().size());
                for (double& v : params.phi_weights) v = draw_param();
            }

            std::vector<ResponseRecord> records;
            for (std::size_t i = 0; i < n_resp; ++i)
                for (std::size_t j = 0; j < n_items; ++j)
                    records.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                                       static_cast<std::int8_t>(coin(rng))});

            TrainConfig cfg;
            cfg.reg_kind = reg_kind;
            cfg.reg_strength = 1e-4;

            Gradients analytic = gradients(records, features, params, cfg);
            if (options.inject_sign_fault)
                for (double& g : analytic.abilities) g = -g;
            Gradients numeric = numeric_gradients(records, features, params, cfg, options.h);

            GradCheckCase result;
            result.kind = kind;
            result.beta_enabled = beta_enabled;
            result.reg_kind = reg_kind;
            result.max_relative_error = detail::max_rel_error(analytic, numeric);
            report.max_relative_error =
                std::max(report.max_relative_error, result.max_relative_error);
            report.cases.push_back(result);
        }
    }
    report.passed = report.max_relative_error < options.tolerance;
    return report;
}

} // namespace pirt

#endif
