#ifndef PIRT_TRAINER_HPP
#define PIRT_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "pirt/model.hpp"

namespace pirt {

enum class RegKind { L1, L2 };

inline std::string to_string(RegKind r) { return r == RegKind::L1 ? "l1" : "l2"; }

inline RegKind reg_kind_from_string(const std::string& s) {
    if (s == "l1" || s == "L1") return RegKind::L1;
    if (s == "l2" || s == "L2") return RegKind::L2;
    throw ConfigError("unknown regularization kind: " + s);
}

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 200;
    RegKind reg_kind = RegKind::L2;
    double reg_strength = 1e-4;
    int batch_size = 1024; // 0 = full batch
    std::uint64_t seed = 0;
    double init_range = 0.5; // abilities ~ uniform(-init_range, init_range)
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.0; // regularization is carried explicitly in the loss
    int threads = 1;

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (reg_strength < 0) throw ConfigError("reg_strength must be non-negative");
        if (batch_size < 0) throw ConfigError("batch_size must be >= 0");
        if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
            throw ConfigError("adam betas must lie in [0,1)");
        if (threads < 1) throw ConfigError("threads must be >= 1");
    }
};

// Gradient set shaped like ModelParameters.
struct Gradients {
    std::vector<double> abilities;
    std::vector<double> beta_weights;
    std::vector<double> phi_weights;

    void resize_like(const ModelParameters& p) {
        abilities.assign(p.abilities.size(), 0.0);
        beta_weights.assign(p.beta_weights.size(), 0.0);
        phi_weights.assign(p.phi_weights.size(), 0.0);
    }
};

namespace detail {

inline double reg_term(const std::vector<double>& v, RegKind kind) {
    double s = 0.0;
    if (kind == RegKind::L2) {
        for (double x : v) s += x * x;
    } else {
        for (double x : v) s += std::abs(x);
    }
    return s;
}

inline void add_reg_gradient(const std::vector<double>& theta, std::vector<double>& grad,
                             RegKind kind, double c) {
    if (c == 0.0) return;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (kind == RegKind::L2) {
            grad[i] += 2.0 * c * theta[i];
        } else if (theta[i] != 0.0) {
            // subgradient convention sign(0) = 0
            grad[i] += c * (theta[i] > 0 ? 1.0 : -1.0);
        }
    }
}

inline void check_finite_params(const ModelParameters& p) {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!ok(p.abilities) || !ok(p.beta_weights) || !ok(p.phi_weights))
        throw NumericalError("training diverged: non-finite parameter");
}

} // namespace detail

// Mean regularized binary cross-entropy over the batch. The penalty applies
// to the free parameters (abilities and feature weights), not the derived
// per-item values.
inline double loss(std::span<const ResponseRecord> records, const ItemFeatureMatrix& features,
                   const ModelParameters& params, const TrainConfig& config) {
    if (records.empty()) throw DataError("loss: empty batch");
    detail::check_finite_params(params);
    double data = 0.0;
    for (const auto& rec : records) {
        const double p = predict_proba(rec, features, params);
        data += rec.label ? -std::log(p) : -std::log(1.0 - p);
    }
    data /= static_cast<double>(records.size());

    double reg = detail::reg_term(params.abilities, config.reg_kind);
    if (params.beta_enabled) reg += detail::reg_term(params.beta_weights, config.reg_kind);
    if (params.kind == ModelKind::TwoPL) reg += detail::reg_term(params.phi_weights, config.reg_kind);
    const double total = data + config.reg_strength * reg;
    if (!std::isfinite(total)) throw NumericalError("training diverged: non-finite loss");
    return total;
}

namespace detail {

// Accumulates the data-term gradient for one record into out. The logit
// gradient is the residual (p - y); it is routed through Eqs. of the model:
// Rasch d/dalpha = r, d/dw = -r * psi; 2PL d/dalpha = r * phi,
// d/dv = r * alpha * psi, d/dw = -r * psi.
inline void record_gradient(const ResponseRecord& rec, const ItemFeatureMatrix& features,
                            const ModelParameters& params, double scale, Gradients& out) {
    const std::size_t item = static_cast<std::size_t>(rec.item);
    const std::size_t resp = static_cast<std::size_t>(rec.respondent);
    const double p = predict_proba(rec, features, params);
    const double r = scale * (p - static_cast<double>(rec.label));

    if (params.kind == ModelKind::Rasch) {
        out.abilities[resp] += r;
    } else {
        const double phi = item_phi(item, features, params);
        const double alpha = params.abilities[resp];
        out.abilities[resp] += r * phi;
        const auto& pcols = features.phi_columns();
        for (std::size_t k = 0; k < pcols.size(); ++k)
            out.phi_weights[k] += r * alpha * features.at(item, pcols[k]);
    }
    if (params.beta_enabled) {
        const auto& bcols = features.beta_columns();
        for (std::size_t k = 0; k < bcols.size(); ++k)
            out.beta_weights[k] += -r * features.at(item, bcols[k]);
    }
}

// Chunk count is fixed so the reduction order (and hence the floating-point
// result) is identical for any worker count.
inline constexpr std::size_t kGradChunks = 8;

} // namespace detail

inline Gradients gradients(std::span<const ResponseRecord> records,
                           const ItemFeatureMatrix& features, const ModelParameters& params,
                           const TrainConfig& config) {
    if (records.empty()) throw DataError("gradients: empty batch");
    detail::check_finite_params(params);

    const double scale = 1.0 / static_cast<double>(records.size());
    const std::size_t n_chunks = std::min(detail::kGradChunks, records.size());
    std::vector<Gradients> partial(n_chunks);
    for (auto& g : partial) g.resize_like(params);

    auto work = [&](std::size_t chunk) {
        const std::size_t begin = records.size() * chunk / n_chunks;
        const std::size_t end = records.size() * (chunk + 1) / n_chunks;
        for (std::size_t i = begin; i < end; ++i)
            detail::record_gradient(records[i], features, params, scale, partial[chunk]);
    };

    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), n_chunks);
    if (n_workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) work(c);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t c = w; c < n_chunks; c += n_workers) work(c);
            });
        for (auto& t : pool) t.join();
    }

    Gradients total;
    total.resize_like(params);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t i = 0; i < total.abilities.size(); ++i)
            total.abilities[i] += partial[c].abilities[i];
        for (std::size_t i = 0; i < total.beta_weights.size(); ++i)
            total.beta_weights[i] += partial[c].beta_weights[i];
        for (std::size_t i = 0; i < total.phi_weights.size(); ++i)
            total.phi_weights[i] += partial[c].phi_weights[i];
    }

    detail::add_reg_gradient(params.abilities, total.abilities, config.reg_kind,
                             config.reg_strength);
    if (params.beta_enabled)
        detail::add_reg_gradient(params.beta_weights, total.beta_weights, config.reg_kind,
                                 config.reg_strength);
    if (params.kind == ModelKind::TwoPL)
        detail::add_reg_gradient(params.phi_weights, total.phi_weights, config.reg_kind,
                                 config.reg_strength);
    return total;
}

struct OptimizerState {
    Gradients m; // first moments
    Gradients v; // second moments
    std::int64_t step = 0;

    void resize_like(const ModelParameters& p) {
        m.resize_like(p);
        v.resize_like(p);
        step = 0;
    }
};

namespace detail {

inline void adamw_update(std::vector<double>& theta, const std::vector<double>& grad,
                         std::vector<double>& m, std::vector<double>& v,
                         const TrainConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        if (!std::isfinite(g)) throw NumericalError("training diverged: non-finite gradient");
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.adam_epsilon) +
                                         cfg.weight_decay * theta[i]);
    }
}

} // namespace detail

// One AdamW step with decoupled weight decay. Step counter increments before
// bias correction.
inline void adamw_step(ModelParameters& params, const Gradients& grads, OptimizerState& state,
                       const TrainConfig& config) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
    detail::adamw_update(params.abilities, grads.abilities, state.m.abilities, state.v.abilities,
                         config, bc1, bc2);
    detail::adamw_update(params.beta_weights, grads.beta_weights, state.m.beta_weights,
                         state.v.beta_weights, config, bc1, bc2);
    detail::adamw_update(params.phi_weights, grads.phi_weights, state.m.phi_weights,
                         state.v.phi_weights, config, bc1, bc2);
}

struct TrainLog {
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;
    std::vector<double> holdout_accuracy; // empty when no holdout was given
};

// Fits abilities and feature weights by minibatch AdamW on the regularized
// cross-entropy. Abilities start uniform(-init_range, init_range) from the
// seed; weights start at zero.
inline ModelParameters fit_with_kind(std::span<const ResponseRecord> responses,
                                     const ItemFeatureMatrix& features, const TrainConfig& config,
                                     std::size_t n_respondents, ModelKind kind, bool beta_enabled,
                                     TrainLog* log = nullptr,
                                     std::span<const ResponseRecord> holdout = {}) {
    config.validate();
    if (responses.empty()) throw DataError("fit: empty dataset");
    if (!features.all_finite()) throw DataError("fit: non-finite feature value");
    for (const auto& rec : responses) {
        if (rec.respondent < 0 || static_cast<std::size_t>(rec.respondent) >= n_respondents)
            throw DataError("fit: respondent index out of range");
        if (rec.item < 0 || static_cast<std::size_t>(rec.item) >= features.item_count())
            throw DataError("fit: item index out of range");
    }
    if (kind == ModelKind::Rasch && !beta_enabled)
        throw ConfigError("Rasch model requires the beta layer");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> init(-config.init_range, config.init_range);

    ModelParameters params;
    params.kind = kind;
    params.beta_enabled = beta_enabled;
    params.abilities.resize(n_respondents);
    for (double& a : params.abilities) a = init(rng);
    params.beta_weights.assign(features.beta_columns().size(), 0.0);
    if (kind == ModelKind::TwoPL)
        params.phi_weights.assign(features.phi_columns().size(), 0.0);

    OptimizerState state;
    state.resize_like(params);

    const std::size_t n = responses.size();
    const std::size_t batch =
        (config.batch_size == 0) ? n : std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<ResponseRecord> shuffled(n);

    const double initial = loss(responses, features, params, config);
    if (log) log->initial_loss = initial;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < n; ++i) shuffled[i] = responses[order[i]];
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            auto g = gradients(std::span<const ResponseRecord>(shuffled.data() + start, len),
                               features, params, config);
            adamw_step(params, g, state, config);
        }
        if (log) {
            log->epoch_loss.push_back(loss(responses, features, params, config));
            if (!holdout.empty()) {
                std::size_t hit = 0;
                for (const auto& rec : holdout)
                    hit += (predict_label(rec, features, params) == rec.label) ? 1 : 0;
                log->holdout_accuracy.push_back(static_cast<double>(hit) /
                                                static_cast<double>(holdout.size()));
            }
        } else {
            // still detect divergence without the full log
            detail::check_finite_params(params);
        }
    }
    return params;
}

inline ModelParameters fit(std::span<const ResponseRecord> responses,
                           const ItemFeatureMatrix& features, const TrainConfig& config,
                           std::size_t n_respondents, TrainLog* log = nullptr,
                           std::span<const ResponseRecord> holdout = {}) {
    const ModelKind kind =
        features.phi_columns().empty() ? ModelKind::Rasch : ModelKind::TwoPL;
    return fit_with_kind(responses, features, config, n_respondents, kind, true, log, holdout);
}

} // namespace pirt

#endif
