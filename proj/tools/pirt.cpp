// Command-line front end: train, cv, predict, synth, gradcheck, analyze.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pirt/analysis.hpp"
#include "pirt/data.hpp"
#include "pirt/eval.hpp"
#include "pirt/gradcheck.hpp"
#include "pirt/model_io.hpp"
#include "pirt/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_level() {
    const char* env = std::getenv("PERSUADE_IRT_LOG");
    if (!env) return 0;
    const std::string v = env;
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[pirt] " << msg << "\n";
}

struct CommonArgs {
    std::string responses;
    std::string items;
    std::string feature_config;
    std::string train_config;
    std::string model;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int folds = 5;
    std::string preset;
    int threads = 1;
    std::string baseline_mode = "sample";
    std::string model_kind = "rasch";
    bool no_beta = false;
    std::string reg;
    int epochs = -1;
    double learning_rate = -1.0;
    int batch_size = -1;
};

pirt::TrainConfig resolve_train_config(const CommonArgs& args) {
    pirt::TrainConfig cfg;
    if (!args.train_config.empty()) {
        json j;
        try {
            j = json::parse(pirt::read_file(args.train_config));
        } catch (const json::exception& e) {
            throw pirt::ConfigError("cannot parse train config " + args.train_config + ": " + e.what());
        }
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.epochs = j.value("epochs", cfg.epochs);
        if (j.contains("reg_kind"))
            cfg.reg_kind = pirt::reg_kind_from_string(j.at("reg_kind").get<std::string>());
        cfg.reg_strength = j.value("reg_strength", cfg.reg_strength);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.init_range = j.value("init_range", cfg.init_range);
        cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
        cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
        cfg.adam_epsilon = j.value("adam_epsilon", cfg.adam_epsilon);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    }
    if (!args.preset.empty()) {
        if (args.preset == "editorials") {
            cfg.epochs = 200;
            cfg.learning_rate = 0.01;
            cfg.reg_kind = pirt::RegKind::L2;
            cfg.batch_size = 0; // small corpus, full batch
        } else if (args.preset == "debates") {
            cfg.epochs = 25;
            cfg.learning_rate = 0.01;
            cfg.reg_kind = pirt::RegKind::L2; // override with --reg l1 per run
        } else if (args.preset == "advocacy") {
            cfg.epochs = 5;
            cfg.learning_rate = 0.005;
            cfg.reg_kind = pirt::RegKind::L2;
        } else {
            throw pirt::ConfigError("unknown preset: " + args.preset);
        }
    }
    if (!args.reg.empty()) cfg.reg_kind = pirt::reg_kind_from_string(args.reg);
    if (args.epochs > 0) cfg.epochs = args.epochs;
    if (args.learning_rate > 0) cfg.learning_rate = args.learning_rate;
    if (args.batch_size >= 0) cfg.batch_size = args.batch_size;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    cfg.validate();
    return cfg;
}

json train_config_to_json(const pirt::TrainConfig& cfg) {
    // threads is deliberately omitted: it never affects the fitted values,
    // and recording it would break byte-identical outputs across runs
    return json{{"learning_rate", cfg.learning_rate},
                {"epochs", cfg.epochs},
                {"reg_kind", pirt::to_string(cfg.reg_kind)},
                {"reg_strength", cfg.reg_strength},
                {"batch_size", cfg.batch_size},
                {"seed", cfg.seed},
                {"init_range", cfg.init_range},
                {"adam_beta1", cfg.adam_beta1},
                {"adam_beta2", cfg.adam_beta2},
                {"adam_epsilon", cfg.adam_epsilon},
                {"weight_decay", cfg.weight_decay}};
}

pirt::FeatureConfig load_feature_config(const std::string& path) {
    if (path.empty()) throw pirt::ConfigError("--feature-config is required");
    json j;
    try {
        j = json::parse(pirt::read_file(path));
    } catch (const json::exception& e) {
        throw pirt::ConfigError("cannot parse feature config " + path + ": " + e.what());
    }
    return pirt::feature_config_from_json(j);
}

pirt::Dataset load_from_args(const CommonArgs& args) {
    if (args.responses.empty()) throw pirt::ConfigError("--responses is required");
    std::optional<fs::path> items;
    if (!args.items.empty()) items = fs::path(args.items);
    return pirt::load_dataset(args.responses, items);
}

std::string train_log_to_csv(const pirt::TrainLog& log) {
    std::string out = log.holdout_accuracy.empty() ? "epoch,train_loss\n"
                                                   : "epoch,train_loss,holdout_accuracy\n";
    for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
        out += std::to_string(e + 1) + "," + pirt::format_double(log.epoch_loss[e]);
        if (!log.holdout_accuracy.empty())
            out += "," + pirt::format_double(log.holdout_accuracy[e]);
        out += "\n";
    }
    return out;
}

int cmd_train(const CommonArgs& args) {
    const pirt::Dataset ds = load_from_args(args);
    const pirt::FeatureConfig fc = load_feature_config(args.feature_config);
    const pirt::TrainConfig tc = resolve_train_config(args);
    const pirt::ModelKind kind = pirt::model_kind_from_string(args.model_kind);

    std::vector<std::size_t> all_items(ds.item_count());
    std::iota(all_items.begin(), all_items.end(), 0);
    pirt::FeaturePipeline pipeline(fc);
    pipeline.fit(ds.items, all_items);
    const pirt::ItemFeatureMatrix matrix = pipeline.transform(ds.items);
    log_info("fitting on " + std::to_string(ds.responses.size()) + " responses, " +
             std::to_string(matrix.feature_count()) + " features");

    pirt::TrainLog log;
    pirt::FittedModel model;
    model.params = pirt::fit_with_kind(ds.responses, matrix, tc, ds.respondent_count(), kind,
                                       !args.no_beta, &log);
    model.respondent_ids = ds.respondent_ids;
    model.feature_names = pipeline.feature_names();
    model.routing = pipeline.routing();
    model.standardization = pipeline.standardization_stats();
    model.rebuild_index();

    json provenance;
    provenance["train"] = train_config_to_json(tc);
    provenance["model_kind"] = pirt::to_string(kind);
    provenance["beta_enabled"] = !args.no_beta;
    provenance["pipeline"] = pipeline.to_json();
    model.resolved_config = provenance;

    const fs::path out_dir = args.out_dir;
    const fs::path model_path = args.model.empty() ? out_dir / "model.json" : fs::path(args.model);
    pirt::save_model(model, model_path);
    pirt::write_file_atomic(out_dir / "train_log.csv", train_log_to_csv(log));
    std::cout << "model: " << model_path.string() << "\n"
              << "final train loss: " << log.epoch_loss.back() << "\n";
    return 0;
}

int cmd_cv(const CommonArgs& args, const std::string& group_key) {
    const pirt::Dataset ds = load_from_args(args);
    const pirt::FeatureConfig fc = load_feature_config(args.feature_config);
    const pirt::TrainConfig tc = resolve_train_config(args);

    pirt::CvOptions opts;
    opts.kind = pirt::model_kind_from_string(args.model_kind);
    opts.beta_enabled = !args.no_beta;
    opts.group_key = group_key;
    const pirt::FoldPlan plan = pirt::make_folds(ds.item_count(), args.folds, args.seed);
    const pirt::EvalReport report = pirt::run_cv(ds, fc, tc, plan, opts);

    const fs::path out_dir = args.out_dir;
    pirt::write_file_atomic(out_dir / "cv_report.json", pirt::report_to_json(report).dump(2) + "\n");
    pirt::write_file_atomic(out_dir / "cv_report.csv", pirt::report_to_csv(report));
    for (const auto& m : report.models)
        std::cout << m.name << ": accuracy=" << m.pooled_accuracy
                  << " macro_f1=" << m.pooled_macro_f1 << "\n";
    return 0;
}

int cmd_predict(const CommonArgs& args, const std::string& out_path) {
    if (args.model.empty()) throw pirt::ConfigError("--model is required");
    const pirt::FittedModel model = pirt::load_model(args.model);
    if (model.resolved_config.is_null() || !model.resolved_config.contains("pipeline"))
        throw pirt::ConfigError("model file lacks pipeline state; cannot featurize new items");
    pirt::FeaturePipeline pipeline =
        pirt::FeaturePipeline::from_json(model.resolved_config.at("pipeline"));
    if (pipeline.feature_names() != model.feature_names)
        throw pirt::ConfigError("feature-name mismatch between model and pipeline state");

    const pirt::Dataset ds = load_from_args(args);
    const pirt::ItemFeatureMatrix matrix = pipeline.transform(ds.items);

    // Abilities aligned to this dataset's respondents; unseen ones get 0.
    pirt::ModelParameters params = model.params;
    params.abilities.assign(ds.respondent_count(), 0.0);
    for (std::size_t i = 0; i < ds.respondent_count(); ++i)
        params.abilities[i] = model.ability_for(ds.respondent_ids[i]);

    std::string csv = "respondent,item,probability,label\n";
    for (const auto& rec : ds.responses) {
        const double p = pirt::predict_proba(rec, matrix, params);
        csv += pirt::csv_field(ds.respondent_ids[static_cast<std::size_t>(rec.respondent)]) + "," +
               pirt::csv_field(ds.item_ids[static_cast<std::size_t>(rec.item)]) + "," +
               pirt::format_double(p) + "," + std::to_string(p >= 0.5 ? 1 : 0) + "\n";
    }
    const fs::path out = out_path.empty() ? fs::path(args.out_dir) / "predictions.csv"
                                          : fs::path(out_path);
    pirt::write_file_atomic(out, csv);
    std::cout << "predictions: " << out.string() << "\n";
    return 0;
}

int cmd_synth(const CommonArgs& args, const pirt::SyntheticSpec& spec_in) {
    pirt::SyntheticSpec spec = spec_in;
    spec.seed = args.seed;
    spec.kind = pirt::model_kind_from_string(args.model_kind);
    spec.beta_enabled = !args.no_beta;
    if (spec.kind == pirt::ModelKind::Rasch && spec.n_phi_features > 0) spec.n_phi_features = 0;
    const pirt::SyntheticResult result = pirt::generate_synthetic(spec);

    const fs::path out_dir = args.out_dir;
    pirt::save_dataset(result.dataset, out_dir / "responses.jsonl", out_dir / "items.jsonl");

    // Feature config routing each synthetic numeric to its generating parameter.
    json fc;
    fc["numerics"] = json::array();
    for (std::size_t k = 0; k < result.features.feature_count(); ++k)
        fc["numerics"].push_back(
            {{"name", result.features.feature_names()[k]},
             {"routing", pirt::to_string(result.features.routing()[k])}});
    pirt::write_file_atomic(out_dir / "features.json", fc.dump(2) + "\n");

    pirt::FittedModel truth;
    truth.params = result.true_params;
    truth.respondent_ids = result.dataset.respondent_ids;
    truth.feature_names = result.features.feature_names();
    truth.routing = result.features.routing();
    truth.rebuild_index();
    pirt::save_model(truth, out_dir / "truth_model.json");

    pirt::write_file_atomic(
        out_dir / "true_abilities.csv",
        pirt::abilities_to_csv(pirt::export_abilities(result.true_params,
                                                      result.dataset.respondent_ids)));
    std::cout << "synthetic dataset: " << result.dataset.responses.size() << " responses, "
              << result.dataset.respondent_count() << " respondents, "
              << result.dataset.item_count() << " items\n";
    return 0;
}

int cmd_gradcheck(const pirt::GradCheckOptions& options) {
    const pirt::GradCheckReport report = pirt::run_gradcheck(options);
    std::cout << "gradcheck: " << report.cases.size()
              << " cases, max relative error = " << report.max_relative_error << " ("
              << (report.passed ? "PASS" : "FAIL") << ")\n";
    if (!report.passed)
        throw pirt::NumericalError("gradient check failed: max relative error " +
                                   std::to_string(report.max_relative_error));
    return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& covariates_path, std::size_t top_k) {
    if (args.model.empty()) throw pirt::ConfigError("--model is required");
    const pirt::FittedModel model = pirt::load_model(args.model);
    const fs::path out_dir = args.out_dir;

    const auto abilities = pirt::export_abilities(model.params, model.respondent_ids);
    pirt::write_file_atomic(out_dir / "abilities.csv", pirt::abilities_to_csv(abilities));

    const auto weights = pirt::weight_report(model);
    pirt::write_file_atomic(out_dir / "weights.csv", pirt::weights_to_csv(weights));
    if (top_k > 0 && model.params.kind == pirt::ModelKind::TwoPL) {
        for (bool by_phi : {false, true}) {
            for (bool highest : {true, false}) {
                std::cout << (highest ? "high " : "low ") << (by_phi ? "polarity" : "popularity")
                          << ":";
                for (const auto& r : pirt::top_weights(weights, by_phi, top_k, highest))
                    std::cout << " " << r.feature_name;
                std::cout << "\n";
            }
        }
    }

    if (!covariates_path.empty()) {
        // CSV: respondent_id,cov1,cov2,... rows join on respondent_id.
        std::istringstream in(pirt::read_file(covariates_path));
        std::string line;
        if (!std::getline(in, line)) throw pirt::DataError("empty covariates file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> headers;
        {
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) headers.push_back(cell);
        }
        if (headers.size() < 2 || headers[0] != "respondent_id")
            throw pirt::DataError("covariates header must be respondent_id,cov1,...");

        std::vector<std::vector<double>> columns(headers.size() - 1);
        std::vector<double> matched_abilities;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() != headers.size())
                throw pirt::DataError(covariates_path + " line " + std::to_string(line_no) +
                                      ": wrong column count");
            if (!model.has_respondent(cells[0])) continue;
            matched_abilities.push_back(model.ability_for(cells[0]));
            for (std::size_t c = 1; c < cells.size(); ++c) {
                try {
                    columns[c - 1].push_back(std::stod(cells[c]));
                } catch (const std::exception&) {
                    throw pirt::DataError(covariates_path + " line " + std::to_string(line_no) +
                                          ": bad number '" + cells[c] + "'");
                }
            }
        }
        std::vector<pirt::CorrelationRow> rows;
        for (std::size_t c = 0; c + 1 < headers.size(); ++c) {
            pirt::CorrelationRow row;
            row.covariate = headers[c + 1];
            row.n = matched_abilities.size();
            row.r = pirt::pearson(matched_abilities, columns[c]);
            row.p = pirt::pearson_p_value(row.r, row.n);
            rows.push_back(row);
        }
        pirt::write_file_atomic(out_dir / "correlations.csv", pirt::correlations_to_csv(rows));
    }
    std::cout << "analysis written to " << out_dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-parameterized IRT models for binary persuasion outcomes"};
    app.require_subcommand(1);

    CommonArgs args;
    pirt::SyntheticSpec synth_spec;
    pirt::GradCheckOptions gc_options;
    std::string group_key, predict_out, covariates_path;
    std::size_t top_k = 10;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--responses", args.responses, "Responses JSONL path");
        cmd->add_option("--items", args.items, "Items JSONL path");
        cmd->add_option("--feature-config", args.feature_config, "Feature config JSON path");
        cmd->add_option("--train-config", args.train_config, "Train config JSON path");
        cmd->add_option("--model", args.model, "Model JSON path");
        cmd->add_option("--out-dir", args.out_dir, "Output directory")->capture_default_str();
        cmd->add_option("--seed", args.seed, "RNG seed")->capture_default_str();
        cmd->add_option("--threads", args.threads, "Worker threads")->capture_default_str();
        cmd->add_option("--preset", args.preset,
                        "Hyperparameter preset: editorials (200 epochs, lr 0.01, L2), "
                        "debates (25 epochs, lr 0.01), advocacy (5 epochs, lr 0.005, L2)");
        cmd->add_option("--model-kind", args.model_kind, "rasch | 2pl")->capture_default_str();
        cmd->add_flag("--no-beta", args.no_beta, "Disable the popularity (beta) layer");
        cmd->add_option("--reg", args.reg, "Regularization kind: l1 | l2");
        cmd->add_option("--epochs", args.epochs, "Override epoch count");
        cmd->add_option("--learning-rate", args.learning_rate, "Override learning rate");
        cmd->add_option("--batch-size", args.batch_size, "Minibatch size (0 = full batch)");
    };

    auto* train = app.add_subcommand("train", "Fit a model and write model JSON + training log");
    add_common(train);

    auto* cv = app.add_subcommand("cv", "Item-level k-fold cross-validated evaluation");
    add_common(cv);
    cv->add_option("--folds", args.folds, "Fold count")->capture_default_str();
    cv->add_option("--group-key", group_key, "Item categorical for group-averaged metrics");
    cv->add_option("--baseline-mode", args.baseline_mode, "sample | majority")->capture_default_str();

    auto* predict = app.add_subcommand("predict", "Per-record probabilities from a saved model");
    add_common(predict);
    predict->add_option("--out", predict_out, "Predictions CSV path");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
    add_common(synth);
    synth->add_option("--respondents", synth_spec.n_respondents, "Respondent count")->capture_default_str();
    synth->add_option("--items-count", synth_spec.n_items, "Item count")->capture_default_str();
    synth->add_option("--beta-features", synth_spec.n_beta_features, "Beta-routed feature count")->capture_default_str();
    synth->add_option("--phi-features", synth_spec.n_phi_features, "Phi-routed feature count")->capture_default_str();
    synth->add_option("--responses-per-respondent", synth_spec.responses_per_respondent,
                      "Responses per respondent")->capture_default_str();
    synth->add_option("--ability-scale", synth_spec.ability_scale, "True ability scale")->capture_default_str();
    synth->add_option("--beta-weight-scale", synth_spec.beta_weight_scale, "True beta weight scale")->capture_default_str();
    synth->add_option("--phi-weight-scale", synth_spec.phi_weight_scale, "True phi weight scale")->capture_default_str();

    auto* gradcheck = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
    gradcheck->add_option("--cases", gc_options.cases_per_kind, "Cases per configuration")->capture_default_str();
    gradcheck->add_option("--seed", gc_options.seed, "RNG seed")->capture_default_str();
    gradcheck->add_option("--tolerance", gc_options.tolerance, "Max relative error")->capture_default_str();
    gradcheck->add_flag("--rasch-only", gc_options.rasch_only, "Check only Rasch gradients");
    gradcheck->add_flag("--inject-sign-fault", gc_options.inject_sign_fault,
                        "Test hook: flip ability gradients (must fail)");

    auto* analyze = app.add_subcommand("analyze", "Embedding, weight, and correlation exports");
    add_common(analyze);
    analyze->add_option("--covariates", covariates_path,
                        "Covariate CSV (respondent_id,cov1,...) for Pearson correlations");
    analyze->add_option("--top-k", top_k, "Top/bottom weight extract size")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(args);
        if (cv->parsed()) return cmd_cv(args, group_key);
        if (predict->parsed()) return cmd_predict(args, predict_out);
        if (synth->parsed()) return cmd_synth(args, synth_spec);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_options);
        if (analyze->parsed()) return cmd_analyze(args, covariates_path, top_k);
    } catch (const pirt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pirt::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const pirt::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
