#ifndef PIRT_MODEL_IO_HPP
#define PIRT_MODEL_IO_HPP

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pirt/io.hpp"
#include "pirt/model.hpp"

namespace pirt {

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;
};

// A trained model plus everything needed to apply it to new items:
// feature schema, routing, and the training-fold standardization stats.
struct FittedModel {
    static constexpr int kSchemaVersion = 1;

    ModelParameters params;
    std::vector<std::string> respondent_ids; // aligned with params.abilities
    std::vector<std::string> feature_names;  // aligned with matrix columns
    std::vector<Routing> routing;
    std::unordered_map<std::string, ColumnStats> standardization;
    nlohmann::json resolved_config; // provenance echo, may be null

    // Unseen respondents get the prior-neutral ability 0.
    double ability_for(const std::string& respondent_id) const {
        auto it = ability_index_.find(respondent_id);
        return it == ability_index_.end() ? 0.0 : params.abilities[it->second];
    }

    bool has_respondent(const std::string& respondent_id) const {
        return ability_index_.count(respondent_id) > 0;
    }

    void rebuild_index() {
        ability_index_.clear();
        for (std::size_t i = 0; i < respondent_ids.size(); ++i)
            ability_index_[respondent_ids[i]] = i;
    }

private:
    std::unordered_map<std::string, std::size_t> ability_index_;
};

inline nlohmann::json model_to_json(const FittedModel& model) {
    nlohmann::json j;
    j["schema_version"] = FittedModel::kSchemaVersion;
    j["model_kind"] = to_string(model.params.kind);
    j["beta_enabled"] = model.params.beta_enabled;
    j["feature_names"] = model.feature_names;
    nlohmann::json routing = nlohmann::json::array();
    for (Routing r : model.routing) routing.push_back(to_string(r));
    j["routing"] = routing;

    nlohmann::json abilities = nlohmann::json::object();
    for (std::size_t i = 0; i < model.respondent_ids.size(); ++i)
        abilities[model.respondent_ids[i]] = model.params.abilities[i];
    j["abilities"] = abilities;

    std::vector<std::size_t> beta_cols, phi_cols;
    for (std::size_t k = 0; k < model.routing.size(); ++k) {
        if (model.routing[k] != Routing::PhiOnly) beta_cols.push_back(k);
        if (model.routing[k] != Routing::BetaOnly) phi_cols.push_back(k);
    }
    nlohmann::json bw = nlohmann::json::object();
    for (std::size_t k = 0; k < beta_cols.size(); ++k)
        bw[model.feature_names[beta_cols[k]]] = model.params.beta_weights[k];
    j["beta_weights"] = bw;
    nlohmann::json pw = nlohmann::json::object();
    for (std::size_t k = 0; k < phi_cols.size(); ++k)
        pw[model.feature_names[phi_cols[k]]] = model.params.phi_weights[k];
    j["phi_weights"] = pw;

    nlohmann::json stats = nlohmann::json::object();
    for (const auto& [name, cs] : model.standardization)
        stats[name] = {{"mean", cs.mean}, {"std", cs.std}};
    j["standardization"] = stats;

    if (!model.resolved_config.is_null()) j["config"] = model.resolved_config;
    return j;
}

inline void save_model(const FittedModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

inline FittedModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") ||
        j.at("schema_version").get<int>() != FittedModel::kSchemaVersion)
        throw ConfigError("unsupported model schema version");

    FittedModel model;
    model.params.kind = model_kind_from_string(j.at("model_kind").get<std::string>());
    model.params.beta_enabled = j.at("beta_enabled").get<bool>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& r : j.at("routing"))
        model.routing.push_back(routing_from_string(r.get<std::string>()));
    if (model.routing.size() != model.feature_names.size())
        throw ConfigError("model file routing length mismatch");

    for (const auto& [id, v] : j.at("abilities").items()) {
        model.respondent_ids.push_back(id);
        model.params.abilities.push_back(v.get<double>());
    }

    std::vector<std::size_t> beta_cols, phi_cols;
    for (std::size_t k = 0; k < model.routing.size(); ++k) {
        if (model.routing[k] != Routing::PhiOnly) beta_cols.push_back(k);
        if (model.routing[k] != Routing::BetaOnly) phi_cols.push_back(k);
    }
    const auto& bw = j.at("beta_weights");
    for (std::size_t col : beta_cols)
        model.params.beta_weights.push_back(bw.at(model.feature_names[col]).get<double>());
    if (model.params.kind == ModelKind::TwoPL) {
        const auto& pw = j.at("phi_weights");
        for (std::size_t col : phi_cols)
            model.params.phi_weights.push_back(pw.at(model.feature_names[col]).get<double>());
    }

    if (j.contains("standardization")) {
        for (const auto& [name, s] : j.at("standardization").items())
            model.standardization[name] = {s.at("mean").get<double>(), s.at("std").get<double>()};
    }
    if (j.contains("config")) model.resolved_config = j.at("config");
    model.rebuild_index();
    return model;
}

inline FittedModel load_model(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cannot parse model file " + path.string() + ": " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed model file " + path.string() + ": " + e.what());
    }
}

} // namespace pirt

#endif
