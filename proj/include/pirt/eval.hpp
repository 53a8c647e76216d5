#ifndef PIRT_EVAL_HPP
#define PIRT_EVAL_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pirt/data.hpp"
#include "pirt/trainer.hpp"

namespace pirt {

inline double accuracy(std::span<const int> preds, std::span<const int> labels) {
    if (preds.empty() || preds.size() != labels.size())
        throw DataError("accuracy: empty or mismatched inputs");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

// Unweighted mean of per-class F1 over {0, 1}; any zero denominator yields
// F1 = 0 for that class.
inline double macro_f1(std::span<const int> preds, std::span<const int> labels) {
    if (preds.empty() || preds.size() != labels.size())
        throw DataError("macro_f1: empty or mismatched inputs");
    double total = 0.0;
    for (int cls : {0, 1}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const bool p = preds[i] == cls;
            const bool l = labels[i] == cls;
            tp += (p && l) ? 1 : 0;
            fp += (p && !l) ? 1 : 0;
            fn += (!p && l) ? 1 : 0;
        }
        const double denom = static_cast<double>(2 * tp + fp + fn);
        total += denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    }
    return total / 2.0;
}

enum class BaselineMode { Sample, Majority };

namespace detail {

struct GroupRates {
    std::map<std::string, double> rate; // group key -> train positive rate
    double global_rate = 0.5;
};

inline GroupRates train_rates(std::span<const ResponseRecord> train,
                              const std::vector<std::string>& group_of_record) {
    GroupRates out;
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts; // pos, total
    std::size_t pos = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto& c = counts[group_of_record[i]];
        c.first += train[i].label;
        c.second += 1;
        pos += train[i].label;
    }
    if (!train.empty()) out.global_rate = static_cast<double>(pos) / static_cast<double>(train.size());
    for (const auto& [g, c] : counts)
        out.rate[g] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return out;
}

inline std::vector<int> prior_predictions(const GroupRates& rates,
                                          const std::vector<std::string>& test_groups,
                                          BaselineMode mode, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> preds;
    preds.reserve(test_groups.size());
    for (const auto& g : test_groups) {
        auto it = rates.rate.find(g);
        const double rate = it == rates.rate.end() ? rates.global_rate : it->second;
        if (mode == BaselineMode::Majority)
            preds.push_back(rate >= 0.5 ? 1 : 0);
        else
            preds.push_back(unif(rng) < rate ? 1 : 0);
    }
    return preds;
}

} // namespace detail

// Predicts each test record from the respondent's training persuasion rate.
// Test labels are never read. Unseen respondents fall back to the global rate.
inline std::vector<int> audience_prior_baseline(std::span<const ResponseRecord> train,
                                                std::span<const ResponseRecord> test,
                                                BaselineMode mode, std::uint64_t seed) {
    std::vector<std::string> train_groups, test_groups;
    for (const auto& r : train) train_groups.push_back(std::to_string(r.respondent));
    for (const auto& r : test) test_groups.push_back(std::to_string(r.respondent));
    return detail::prior_predictions(detail::train_rates(train, train_groups), test_groups, mode,
                                     seed);
}

// Same as the audience prior but grouped by an item categorical (e.g. org),
// given per-item group labels.
inline std::vector<int> group_prior_baseline(std::span<const ResponseRecord> train,
                                             std::span<const ResponseRecord> test,
                                             const std::vector<std::string>& item_group,
                                             BaselineMode mode, std::uint64_t seed) {
    std::vector<std::string> train_groups, test_groups;
    for (const auto& r : train) train_groups.push_back(item_group.at(static_cast<std::size_t>(r.item)));
    for (const auto& r : test) test_groups.push_back(item_group.at(static_cast<std::size_t>(r.item)));
    return detail::prior_predictions(detail::train_rates(train, train_groups), test_groups, mode,
                                     seed);
}

inline std::vector<int> random_baseline(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> preds(n);
    for (auto& p : preds) p = unif(rng) < 0.5 ? 1 : 0;
    return preds;
}

// ---------------------------------------------------------------------------
// Cross-validated evaluation

struct CvOptions {
    ModelKind kind = ModelKind::Rasch;
    bool beta_enabled = true;
    double threshold = 0.5;
    std::string group_key;  // item categorical for the org-style grouping; empty = skip
    int baseline_draws = 10;
};

// One evaluated predictor (model or baseline).
struct ModelScores {
    std::string name;
    std::vector<double> fold_accuracy;
    std::vector<double> fold_macro_f1;
    double pooled_accuracy = 0.0;
    double pooled_macro_f1 = 0.0;
    double audience_avg_accuracy = 0.0;
    double audience_avg_macro_f1 = 0.0;
    double group_avg_accuracy = 0.0; // only when a group key was given
    double group_avg_macro_f1 = 0.0;
    bool has_group_avg = false;
    double accuracy_std = 0.0; // across sample draws, for stochastic baselines
};

struct EvalReport {
    int folds = 0;
    std::vector<ModelScores> models;
};

namespace detail {

struct PredictionSet {
    std::vector<int> preds;         // aligned with test record order
    std::vector<int> labels;
    std::vector<int> fold;          // fold each record was tested in
    std::vector<std::int32_t> resp; // respondent index
    std::vector<std::string> group; // item group value (may be empty strings)
};

inline ModelScores score_predictions(const std::string& name, const PredictionSet& ps, int k,
                                     bool with_group) {
    ModelScores s;
    s.name = name;
    for (int f = 0; f < k; ++f) {
        std::vector<int> p, l;
        for (std::size_t i = 0; i < ps.preds.size(); ++i)
            if (ps.fold[i] == f) {
                p.push_back(ps.preds[i]);
                l.push_back(ps.labels[i]);
            }
        s.fold_accuracy.push_back(accuracy(p, l));
        s.fold_macro_f1.push_back(macro_f1(p, l));
    }
    s.pooled_accuracy = accuracy(ps.preds, ps.labels);
    s.pooled_macro_f1 = macro_f1(ps.preds, ps.labels);

    auto group_average = [&](auto key_of) {
        std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> groups;
        for (std::size_t i = 0; i < ps.preds.size(); ++i) {
            auto& g = groups[key_of(i)];
            g.first.push_back(ps.preds[i]);
            g.second.push_back(ps.labels[i]);
        }
        double acc = 0.0, f1 = 0.0;
        for (const auto& [_, g] : groups) {
            acc += accuracy(g.first, g.second);
            f1 += macro_f1(g.first, g.second);
        }
        const double n = static_cast<double>(groups.size());
        return std::pair{acc / n, f1 / n};
    };
    auto [aa, af] = group_average([&](std::size_t i) { return std::to_string(ps.resp[i]); });
    s.audience_avg_accuracy = aa;
    s.audience_avg_macro_f1 = af;
    if (with_group) {
        auto [ga, gf] = group_average([&](std::size_t i) { return ps.group[i]; });
        s.group_avg_accuracy = ga;
        s.group_avg_macro_f1 = gf;
        s.has_group_avg = true;
    }
    return s;
}

} // namespace detail

// Per fold: features fit on training items only, model fit on training
// responses, test responses scored. Reports the model, the prior baselines
// (sampled mean over draws and deterministic majority) and a fair coin.
inline EvalReport run_cv(const Dataset& ds, const FeatureConfig& feature_config,
                         const TrainConfig& train_config, const FoldPlan& plan,
                         const CvOptions& options = {}) {
    const int k = plan.k;
    const bool with_group = !options.group_key.empty();
    std::vector<std::string> item_group(ds.item_count());
    if (with_group) {
        for (std::size_t j = 0; j < ds.item_count(); ++j) {
            auto it = ds.items[j].categoricals.find(options.group_key);
            item_group[j] = it == ds.items[j].categoricals.end() ? "" : it->second;
        }
    }

    detail::PredictionSet model_ps;
    std::vector<detail::PredictionSet> sample_ps(static_cast<std::size_t>(options.baseline_draws));
    detail::PredictionSet majority_ps, random_ps;
    std::vector<detail::PredictionSet> group_sample_ps;
    detail::PredictionSet group_majority_ps;
    if (with_group) group_sample_ps.resize(static_cast<std::size_t>(options.baseline_draws));

    for (int f = 0; f < k; ++f) {
        const auto train_items = plan.items_outside_fold(f);
        std::vector<bool> in_train_fold(ds.item_count(), false);
        for (std::size_t j : train_items) in_train_fold[j] = true;

        std::vector<ResponseRecord> train_recs, test_recs;
        for (const auto& rec : ds.responses)
            (in_train_fold[static_cast<std::size_t>(rec.item)] ? train_recs : test_recs).push_back(rec);
        if (train_recs.empty() || test_recs.empty())
            throw DataError("fold " + std::to_string(f) + " has an empty train or test split");

        FeaturePipeline pipeline(feature_config);
        pipeline.fit(ds.items, train_items);
        ItemFeatureMatrix matrix = pipeline.transform(ds.items);

        TrainConfig fold_cfg = train_config;
        fold_cfg.seed = train_config.seed * 1000003 + static_cast<std::uint64_t>(f);
        ModelParameters params = fit_with_kind(train_recs, matrix, fold_cfg,
                                               ds.respondent_count(), options.kind,
                                               options.beta_enabled);

        // Respondents unseen in this training split predict from ability 0.
        std::vector<bool> trained(ds.respondent_count(), false);
        for (const auto& rec : train_recs) trained[static_cast<std::size_t>(rec.respondent)] = true;
        for (std::size_t i = 0; i < params.abilities.size(); ++i)
            if (!trained[i]) params.abilities[i] = 0.0;

        auto push = [&](detail::PredictionSet& ps, const ResponseRecord& rec, int pred) {
            ps.preds.push_back(pred);
            ps.labels.push_back(rec.label);
            ps.fold.push_back(f);
            ps.resp.push_back(rec.respondent);
            ps.group.push_back(with_group ? item_group[static_cast<std::size_t>(rec.item)] : "");
        };

        for (const auto& rec : test_recs)
            push(model_ps, rec, predict_label(rec, matrix, params, options.threshold));

        const std::uint64_t base_seed = train_config.seed * 2654435761u + static_cast<std::uint64_t>(f);
        for (int d = 0; d < options.baseline_draws; ++d) {
            auto preds = audience_prior_baseline(train_recs, test_recs, BaselineMode::Sample,
                                                 base_seed + static_cast<std::uint64_t>(d) * 7919);
            for (std::size_t i = 0; i < test_recs.size(); ++i)
                push(sample_ps[static_cast<std::size_t>(d)], test_recs[i], preds[i]);
        }
        {
            auto preds = audience_prior_baseline(train_recs, test_recs, BaselineMode::Majority, 0);
            for (std::size_t i = 0; i < test_recs.size(); ++i)
                push(majority_ps, test_recs[i], preds[i]);
        }
        {
            auto preds = random_baseline(test_recs.size(), base_seed + 17);
            for (std::size_t i = 0; i < test_recs.size(); ++i)
                push(random_ps, test_recs[i], preds[i]);
        }
        if (with_group) {
            for (int d = 0; d < options.baseline_draws; ++d) {
                auto preds = group_prior_baseline(train_recs, test_recs, item_group,
                                                  BaselineMode::Sample,
                                                  base_seed + 31 + static_cast<std::uint64_t>(d) * 7919);
                for (std::size_t i = 0; i < test_recs.size(); ++i)
                    push(group_sample_ps[static_cast<std::size_t>(d)], test_recs[i], preds[i]);
            }
            auto preds = group_prior_baseline(train_recs, test_recs, item_group,
                                              BaselineMode::Majority, 0);
            for (std::size_t i = 0; i < test_recs.size(); ++i)
                push(group_majority_ps, test_recs[i], preds[i]);
        }
    }

    EvalReport report;
    report.folds = k;
    report.models.push_back(detail::score_predictions("model", model_ps, k, with_group));

    auto summarize_draws = [&](const std::string& name,
                               const std::vector<detail::PredictionSet>& draws) {
        std::vector<ModelScores> per_draw;
        for (const auto& ps : draws)
            per_draw.push_back(detail::score_predictions(name, ps, k, with_group));
        ModelScores mean = per_draw.front();
        mean.name = name;
        auto avg = [&](auto member) {
            double s = 0.0;
            for (const auto& d : per_draw) s += d.*member;
            return s / static_cast<double>(per_draw.size());
        };
        mean.pooled_accuracy = avg(&ModelScores::pooled_accuracy);
        mean.pooled_macro_f1 = avg(&ModelScores::pooled_macro_f1);
        mean.audience_avg_accuracy = avg(&ModelScores::audience_avg_accuracy);
        mean.audience_avg_macro_f1 = avg(&ModelScores::audience_avg_macro_f1);
        if (with_group) {
            mean.group_avg_accuracy = avg(&ModelScores::group_avg_accuracy);
            mean.group_avg_macro_f1 = avg(&ModelScores::group_avg_macro_f1);
        }
        for (int f = 0; f < k; ++f) {
            double a = 0.0, m = 0.0;
            for (const auto& d : per_draw) {
                a += d.fold_accuracy[static_cast<std::size_t>(f)];
                m += d.fold_macro_f1[static_cast<std::size_t>(f)];
            }
            mean.fold_accuracy[static_cast<std::size_t>(f)] = a / static_cast<double>(per_draw.size());
            mean.fold_macro_f1[static_cast<std::size_t>(f)] = m / static_cast<double>(per_draw.size());
        }
        double var = 0.0;
        for (const auto& d : per_draw) {
            const double diff = d.pooled_accuracy - mean.pooled_accuracy;
            var += diff * diff;
        }
        mean.accuracy_std = std::sqrt(var / static_cast<double>(per_draw.size()));
        return mean;
    };

    report.models.push_back(summarize_draws("audience_prior_sample", sample_ps));
    report.models.push_back(detail::score_predictions("audience_prior_majority", majority_ps, k, with_group));
    report.models.push_back(detail::score_predictions("random", random_ps, k, with_group));
    if (with_group) {
        report.models.push_back(summarize_draws("group_prior_sample", group_sample_ps));
        report.models.push_back(
            detail::score_predictions("group_prior_majority", group_majority_ps, k, with_group));
    }
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["folds"] = report.folds;
    j["models"] = nlohmann::json::array();
    for (const auto& m : report.models) {
        nlohmann::json e;
        e["name"] = m.name;
        e["fold_accuracy"] = m.fold_accuracy;
        e["fold_macro_f1"] = m.fold_macro_f1;
        e["pooled_accuracy"] = m.pooled_accuracy;
        e["pooled_macro_f1"] = m.pooled_macro_f1;
        e["audience_avg_accuracy"] = m.audience_avg_accuracy;
        e["audience_avg_macro_f1"] = m.audience_avg_macro_f1;
        if (m.has_group_avg) {
            e["group_avg_accuracy"] = m.group_avg_accuracy;
            e["group_avg_macro_f1"] = m.group_avg_macro_f1;
        }
        e["accuracy_std"] = m.accuracy_std;
        j["models"].push_back(e);
    }
    return j;
}

// Flat CSV: one row per (model, metric, scope).
inline std::string report_to_csv(const EvalReport& report) {
    std::string out = "model,metric,scope,value\n";
    auto row = [&](const std::string& model, const std::string& metric, const std::string& scope,
                   double value) {
        out += csv_field(model) + "," + metric + "," + scope + "," + format_double(value) + "\n";
    };
    for (const auto& m : report.models) {
        for (std::size_t f = 0; f < m.fold_accuracy.size(); ++f) {
            row(m.name, "accuracy", "fold" + std::to_string(f), m.fold_accuracy[f]);
            row(m.name, "macro_f1", "fold" + std::to_string(f), m.fold_macro_f1[f]);
        }
        row(m.name, "accuracy", "pooled", m.pooled_accuracy);
        row(m.name, "macro_f1", "pooled", m.pooled_macro_f1);
        row(m.name, "accuracy", "audience_avg", m.audience_avg_accuracy);
        row(m.name, "macro_f1", "audience_avg", m.audience_avg_macro_f1);
        if (m.has_group_avg) {
            row(m.name, "accuracy", "group_avg", m.group_avg_accuracy);
            row(m.name, "macro_f1", "group_avg", m.group_avg_macro_f1);
        }
    }
    return out;
}

} // namespace pirt

#endif
