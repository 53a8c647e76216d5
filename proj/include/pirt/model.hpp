#ifndef PIRT_MODEL_HPP
#define PIRT_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pirt/common.hpp"

namespace pirt {

// One observed binary persuasion outcome.
struct ResponseRecord {
    std::int32_t respondent = 0;
    std::int32_t item = 0;
    std::int8_t label = 0; // 0 = not persuaded, 1 = persuaded
};

// Dense per-item feature matrix with named, routed columns.
class ItemFeatureMatrix {
public:
    ItemFeatureMatrix() = default;

    ItemFeatureMatrix(std::vector<std::string> names, std::vector<Routing> routing,
                      std::size_t n_items)
        : names_(std::move(names)), routing_(std::move(routing)), n_items_(n_items) {
        if (names_.size() != routing_.size())
            throw ConfigError("feature names and routing tags differ in length");
        values_.assign(n_items_ * names_.size(), 0.0);
        rebuild_routes();
    }

    std::size_t item_count() const { return n_items_; }
    std::size_t feature_count() const { return names_.size(); }
    const std::vector<std::string>& feature_names() const { return names_; }
    const std::vector<Routing>& routing() const { return routing_; }

    double at(std::size_t item, std::size_t feature) const {
        return values_[item * names_.size() + feature];
    }
    void set(std::size_t item, std::size_t feature, double v) {
        values_[item * names_.size() + feature] = v;
    }

    // Column indices feeding each item parameter, in feature order.
    const std::vector<std::size_t>& beta_columns() const { return beta_cols_; }
    const std::vector<std::size_t>& phi_columns() const { return phi_cols_; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(),
                           [](double v) { return std::isfinite(v); });
    }

private:
    void rebuild_routes() {
        beta_cols_.clear();
        phi_cols_.clear();
        for (std::size_t k = 0; k < routing_.size(); ++k) {
            if (routing_[k] != Routing::PhiOnly) beta_cols_.push_back(k);
            if (routing_[k] != Routing::BetaOnly) phi_cols_.push_back(k);
        }
    }

    std::vector<std::string> names_;
    std::vector<Routing> routing_;
    std::vector<double> values_;
    std::size_t n_items_ = 0;
    std::vector<std::size_t> beta_cols_, phi_cols_;
};

// Free parameters of a fitted (or in-training) model. Item parameters are
// always derived from features, never stored per item.
struct ModelParameters {
    std::vector<double> abilities;    // one per respondent
    std::vector<double> beta_weights; // one per beta-routed feature
    std::vector<double> phi_weights;  // one per phi-routed feature; empty for Rasch
    ModelKind kind = ModelKind::Rasch;
    bool beta_enabled = true;
};

// Logits are clamped before exponentiation; gradients are taken on the
// clamped value.
inline constexpr double kLogitClamp = 30.0;

inline double sigmoid(double x) {
    const double z = std::clamp(x, -kLogitClamp, kLogitClamp);
    return 1.0 / (1.0 + std::exp(-z));
}

inline double item_beta(std::size_t item, const ItemFeatureMatrix& features,
                        const ModelParameters& params) {
    if (!params.beta_enabled) return 0.0;
    const auto& cols = features.beta_columns();
    if (cols.size() != params.beta_weights.size())
        throw ConfigError("beta weight count does not match beta-routed feature count");
    double dot = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k)
        dot += params.beta_weights[k] * features.at(item, cols[k]);
    return dot;
}

inline double item_phi(std::size_t item, const ItemFeatureMatrix& features,
                       const ModelParameters& params) {
    if (params.kind != ModelKind::TwoPL)
        throw ConfigError("item_phi called on a Rasch model");
    const auto& cols = features.phi_columns();
    if (cols.size() != params.phi_weights.size())
        throw ConfigError("phi weight count does not match phi-routed feature count");
    double dot = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k)
        dot += params.phi_weights[k] * features.at(item, cols[k]);
    return dot;
}

inline double predict_logit(const ResponseRecord& rec, const ItemFeatureMatrix& features,
                            const ModelParameters& params) {
    const double ability = params.abilities[static_cast<std::size_t>(rec.respondent)];
    const double beta = item_beta(static_cast<std::size_t>(rec.item), features, params);
    if (params.kind == ModelKind::Rasch) return ability - beta;
    const double phi = item_phi(static_cast<std::size_t>(rec.item), features, params);
    return ability * phi - beta;
}

inline double predict_proba(const ResponseRecord& rec, const ItemFeatureMatrix& features,
                            const ModelParameters& params) {
    return sigmoid(predict_logit(rec, features, params));
}

// Ties at the threshold go to the positive class.
inline int predict_label(const ResponseRecord& rec, const ItemFeatureMatrix& features,
                         const ModelParameters& params, double threshold = 0.5) {
    return predict_proba(rec, features, params) >= threshold ? 1 : 0;
}

} // namespace pirt

#endif
