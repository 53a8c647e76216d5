#ifndef PIRT_DATA_HPP
#define PIRT_DATA_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "pirt/features.hpp"
#include "pirt/io.hpp"
#include "pirt/model.hpp"

namespace pirt {

struct Dataset {
    std::vector<std::string> respondent_ids; // first-seen order
    std::vector<std::string> item_ids;       // first-seen order
    std::vector<ResponseRecord> responses;
    std::vector<ItemRecord> items; // aligned with item_ids; may be empty shells

    std::size_t respondent_count() const { return respondent_ids.size(); }
    std::size_t item_count() const { return item_ids.size(); }
};

// Minimum observation counts; filters are applied to a fixpoint because
// removing a respondent can drop an item below its floor and vice versa.
struct DatasetFloors {
    std::size_t min_per_respondent = 1;
    std::size_t min_per_item = 1;
    // Optional respondent positive-rate band (advocacy-style filter).
    std::optional<std::pair<double, double>> respondent_rate_band;
};

namespace detail {

struct RawResponse {
    std::string respondent;
    std::string item;
    int label;
};

inline std::vector<RawResponse> parse_responses_jsonl(const std::string& content,
                                                      const std::string& path) {
    std::vector<RawResponse> out;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    std::set<std::pair<std::string, std::string>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            RawResponse r{j.at("respondent").get<std::string>(), j.at("item").get<std::string>(),
                          j.at("label").get<int>()};
            if (r.label != 0 && r.label != 1)
                throw DataError(path + " line " + std::to_string(line_no) +
                                ": label must be 0 or 1");
            if (!seen.insert({r.respondent, r.item}).second)
                throw DataError(path + " line " + std::to_string(line_no) + ": duplicate pair (" +
                                r.respondent + ", " + r.item + ")");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline ItemRecord parse_item_json(const nlohmann::json& j) {
    ItemRecord item;
    item.item_id = j.at("item").get<std::string>();
    item.text = j.value("text", std::string{});
    if (j.contains("categoricals"))
        for (const auto& [k, v] : j.at("categoricals").items())
            item.categoricals[k] = v.get<std::string>();
    if (j.contains("sentence_scores"))
        for (const auto& [k, v] : j.at("sentence_scores").items())
            item.sentence_scores[k] = v.get<std::vector<double>>();
    if (j.contains("numerics"))
        for (const auto& [k, v] : j.at("numerics").items()) item.numerics[k] = v.get<double>();
    return item;
}

inline nlohmann::json item_to_json(const ItemRecord& item) {
    nlohmann::json j;
    j["item"] = item.item_id;
    j["text"] = item.text;
    j["categoricals"] = item.categoricals;
    j["sentence_scores"] = item.sentence_scores;
    j["numerics"] = item.numerics;
    return j;
}

} // namespace detail

// Loads JSON Lines responses (and optionally items), interning ids in
// first-seen order and applying the count floors to a fixpoint.
inline Dataset load_dataset(const std::filesystem::path& responses_path,
                            const std::optional<std::filesystem::path>& items_path = std::nullopt,
                            const DatasetFloors& floors = {}) {
    auto raw = detail::parse_responses_jsonl(read_file(responses_path), responses_path.string());
    if (raw.empty()) throw DataError(responses_path.string() + ": empty dataset");

    std::unordered_map<std::string, ItemRecord> item_records;
    if (items_path) {
        std::istringstream in(read_file(*items_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                ItemRecord item = detail::parse_item_json(nlohmann::json::parse(line));
                if (item_records.count(item.item_id))
                    throw DataError(items_path->string() + " line " + std::to_string(line_no) +
                                    ": duplicate item '" + item.item_id + "'");
                item_records[item.item_id] = std::move(item);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(items_path->string() + " line " + std::to_string(line_no) + ": " +
                                e.what());
            }
        }
    }

    // Fixpoint floor filtering on the raw records.
    std::vector<bool> keep(raw.size(), true);
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, std::size_t> per_resp, per_item;
        std::unordered_map<std::string, std::size_t> pos_per_resp;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!keep[i]) continue;
            ++per_resp[raw[i].respondent];
            ++per_item[raw[i].item];
            if (raw[i].label == 1) ++pos_per_resp[raw[i].respondent];
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!keep[i]) continue;
            bool drop = per_resp[raw[i].respondent] < floors.min_per_respondent ||
                        per_item[raw[i].item] < floors.min_per_item;
            if (!drop && floors.respondent_rate_band) {
                const double rate = static_cast<double>(pos_per_resp[raw[i].respondent]) /
                                    static_cast<double>(per_resp[raw[i].respondent]);
                drop = rate < floors.respondent_rate_band->first ||
                       rate > floors.respondent_rate_band->second;
            }
            if (drop) {
                keep[i] = false;
                changed = true;
            }
        }
    }

    Dataset ds;
    std::unordered_map<std::string, std::int32_t> resp_index, item_index;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!keep[i]) continue;
        auto [rit, rnew] = resp_index.try_emplace(raw[i].respondent,
                                                  static_cast<std::int32_t>(ds.respondent_ids.size()));
        if (rnew) ds.respondent_ids.push_back(raw[i].respondent);
        auto [iit, inew] =
            item_index.try_emplace(raw[i].item, static_cast<std::int32_t>(ds.item_ids.size()));
        if (inew) ds.item_ids.push_back(raw[i].item);
        ds.responses.push_back({rit->second, iit->second, static_cast<std::int8_t>(raw[i].label)});
    }
    if (ds.responses.empty()) throw DataError(responses_path.string() + ": empty dataset after floor filtering");

    ds.items.resize(ds.item_ids.size());
    for (std::size_t i = 0; i < ds.item_ids.size(); ++i) {
        auto it = item_records.find(ds.item_ids[i]);
        if (it != item_records.end()) {
            ds.items[i] = it->second;
        } else {
            if (items_path)
                throw DataError("item '" + ds.item_ids[i] + "' referenced by responses but missing from " +
                                items_path->string());
            ds.items[i].item_id = ds.item_ids[i];
        }
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& responses_path,
                         const std::filesystem::path& items_path) {
    std::string responses;
    for (const auto& rec : ds.responses) {
        nlohmann::json j = {{"respondent", ds.respondent_ids[static_cast<std::size_t>(rec.respondent)]},
                            {"item", ds.item_ids[static_cast<std::size_t>(rec.item)]},
                            {"label", static_cast<int>(rec.label)}};
        responses += j.dump() + "\n";
    }
    write_file_atomic(responses_path, responses);

    std::string items;
    for (const auto& item : ds.items) items += detail::item_to_json(item).dump() + "\n";
    write_file_atomic(items_path, items);
}

// Item-level fold assignment: items shuffled by seed, dealt round-robin.
struct FoldPlan {
    int k = 5;
    std::vector<int> assignment; // item index -> fold label in [0, k)

    std::vector<std::size_t> items_in_fold(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == fold) out.push_back(i);
        return out;
    }
    std::vector<std::size_t> items_outside_fold(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] != fold) out.push_back(i);
        return out;
    }
};

inline FoldPlan make_folds(std::size_t item_count, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2");
    if (static_cast<std::size_t>(k) > item_count)
        throw ConfigError("fold count exceeds item count");
    std::vector<std::size_t> order(item_count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    FoldPlan plan;
    plan.k = k;
    plan.assignment.assign(item_count, 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return plan;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
    std::size_t n_respondents = 200;
    std::size_t n_items = 300;
    std::size_t n_beta_features = 5;
    std::size_t n_phi_features = 0; // > 0 implies 2PL features exist
    std::size_t responses_per_respondent = 60;
    ModelKind kind = ModelKind::Rasch;
    bool beta_enabled = true;
    double ability_scale = 1.0;
    double beta_weight_scale = 1.0;
    double phi_weight_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_respondents == 0 || n_items == 0) throw ConfigError("synthetic: counts must be positive");
        if (responses_per_respondent == 0 || responses_per_respondent > n_items)
            throw ConfigError("synthetic: responses per respondent must be in [1, items]");
        if (kind == ModelKind::TwoPL && n_phi_features == 0)
            throw ConfigError("synthetic: 2PL requires phi features");
        if (kind == ModelKind::Rasch && n_phi_features != 0)
            throw ConfigError("synthetic: Rasch takes no phi features");
        if (kind == ModelKind::Rasch && !beta_enabled)
            throw ConfigError("synthetic: Rasch requires the beta layer");
    }
};

struct SyntheticResult {
    Dataset dataset;
    ItemFeatureMatrix features;
    ModelParameters true_params;
};

// Draws true abilities/weights and item features from normals, computes true
// probabilities through the forward model and samples Bernoulli labels.
// Feature values are also stored on the items as numerics so the dataset can
// round-trip through files and the feature pipeline.
inline SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticResult out;
    std::vector<std::string> names;
    std::vector<Routing> routing;
    for (std::size_t k = 0; k < spec.n_beta_features; ++k) {
        names.push_back("f_beta_" + std::to_string(k));
        routing.push_back(Routing::BetaOnly);
    }
    for (std::size_t k = 0; k < spec.n_phi_features; ++k) {
        names.push_back("f_phi_" + std::to_string(k));
        routing.push_back(Routing::PhiOnly);
    }
    out.features = ItemFeatureMatrix(names, routing, spec.n_items);
    for (std::size_t j = 0; j < spec.n_items; ++j)
        for (std::size_t k = 0; k < names.size(); ++k) out.features.set(j, k, normal(rng));

    out.true_params.kind = spec.kind;
    out.true_params.beta_enabled = spec.beta_enabled;
    out.true_params.abilities.resize(spec.n_respondents);
    for (double& a : out.true_params.abilities) a = spec.ability_scale * normal(rng);
    out.true_params.beta_weights.resize(spec.n_beta_features);
    for (double& w : out.true_params.beta_weights) w = spec.beta_weight_scale * normal(rng);
    if (spec.kind == ModelKind::TwoPL) {
        out.true_params.phi_weights.resize(spec.n_phi_features);
        for (double& v : out.true_params.phi_weights) v = spec.phi_weight_scale * normal(rng);
    }

    Dataset& ds = out.dataset;
    for (std::size_t i = 0; i < spec.n_respondents; ++i)
        ds.respondent_ids.push_back("r" + std::to_string(i));
    for (std::size_t j = 0; j < spec.n_items; ++j) ds.item_ids.push_back("item" + std::to_string(j));
    ds.items.resize(spec.n_items);
    for (std::size_t j = 0; j < spec.n_items; ++j) {
        ds.items[j].item_id = ds.item_ids[j];
        for (std::size_t k = 0; k < names.size(); ++k)
            ds.items[j].numerics[names[k]] = out.features.at(j, k);
    }

    std::vector<std::size_t> item_order(spec.n_items);
    std::iota(item_order.begin(), item_order.end(), 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < spec.n_respondents; ++i) {
        std::shuffle(item_order.begin(), item_order.end(), rng);
        for (std::size_t n = 0; n < spec.responses_per_respondent; ++n) {
            ResponseRecord rec;
            rec.respondent = static_cast<std::int32_t>(i);
            rec.item = static_cast<std::int32_t>(item_order[n]);
            const double p = predict_proba(rec, out.features, out.true_params);
            rec.label = unif(rng) < p ? 1 : 0;
            ds.responses.push_back(rec);
        }
    }
    return out;
}

} // namespace pirt

#endif
