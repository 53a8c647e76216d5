#ifndef PIRT_FEATURES_HPP
#define PIRT_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pirt/io.hpp"
#include "pirt/model.hpp"
#include "pirt/model_io.hpp"

namespace pirt {

// Raw per-item input before featurization.
struct ItemRecord {
    std::string item_id;
    std::string text;
    std::map<std::string, std::string> categoricals;
    std::map<std::string, std::vector<double>> sentence_scores;
    std::map<std::string, double> numerics;
};

namespace detail {

inline bool is_word_codepoint(char32_t cp) {
    if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7; // Latin-1 letters
    if (cp >= 0x100 && cp <= 0x24F) return true;                   // Latin extended
    if (cp >= 0x370 && cp <= 0x3FF) return cp >= 0x386;            // Greek
    if (cp >= 0x400 && cp <= 0x4FF) return true;                   // Cyrillic
    if (cp >= 0x4E00 && cp <= 0x9FFF) return true;                 // CJK
    if (cp >= 0x3040 && cp <= 0x30FF) return true;                 // kana
    return false;
}

inline char32_t lower_codepoint(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x100 && cp <= 0x17F) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Decodes the next UTF-8 codepoint; malformed bytes are treated as
// single-byte non-word characters.
inline char32_t next_codepoint(const std::string& s, std::size_t& i) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) { i += 1; return b0; }
    auto cont = [&](std::size_t off) -> int {
        if (i + off >= s.size()) return -1;
        const unsigned char b = static_cast<unsigned char>(s[i + off]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if ((b0 & 0xE0) == 0xC0) {
        int c1 = cont(1);
        if (c1 >= 0) { char32_t cp = ((b0 & 0x1F) << 6) | c1; i += 2; return cp; }
    } else if ((b0 & 0xF0) == 0xE0) {
        int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            char32_t cp = ((b0 & 0x0F) << 12) | (c1 << 6) | c2;
            i += 3;
            return cp;
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            char32_t cp = ((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3;
            i += 4;
            return cp;
        }
    }
    i += 1;
    return 0xFFFD;
}

} // namespace detail

// Lowercased word tokens split on non-alphanumeric codepoint boundaries.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = detail::next_codepoint(text, i);
        if (detail::is_word_codepoint(cp)) {
            detail::append_utf8(current, detail::lower_codepoint(cp));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// Approximate sentence splitter on ./?/!; only for callers that need
// sentence units and have no precomputed per-sentence scores.
inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        current += c;
        if (c == '.' || c == '?' || c == '!') {
            if (current.find_first_not_of(" \t\n\r.?!") != std::string::npos)
                out.push_back(current);
            current.clear();
        }
    }
    if (current.find_first_not_of(" \t\n\r") != std::string::npos) out.push_back(current);
    return out;
}

// ---------------------------------------------------------------------------
// TF-IDF

struct TfidfModel {
    std::vector<std::string> vocabulary; // lexicographic order
    std::vector<double> idf;             // aligned with vocabulary
    std::unordered_map<std::string, std::size_t> index;

    void rebuild_index() {
        index.clear();
        for (std::size_t i = 0; i < vocabulary.size(); ++i) index[vocabulary[i]] = i;
    }
};

// Vocabulary: top max_features unigrams by document frequency (ties broken
// lexicographically), df >= min_df. idf(t) = ln((1+N)/(1+df)) + 1.
inline TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t max_features, std::size_t min_df = 1) {
    if (corpus.empty()) throw DataError("fit_tfidf: empty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        std::map<std::string, bool> seen;
        for (const auto& tok : doc) {
            if (!seen[tok]) {
                seen[tok] = true;
                ++df[tok];
            }
        }
    }
    std::vector<std::pair<std::string, std::size_t>> candidates;
    for (const auto& [word, count] : df)
        if (count >= min_df) candidates.emplace_back(word, count);
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (candidates.size() > max_features) candidates.resize(max_features);

    TfidfModel model;
    for (const auto& [word, count] : candidates) model.vocabulary.push_back(word);
    std::sort(model.vocabulary.begin(), model.vocabulary.end());
    const double n_docs = static_cast<double>(corpus.size());
    model.idf.resize(model.vocabulary.size());
    for (std::size_t i = 0; i < model.vocabulary.size(); ++i) {
        const double d = static_cast<double>(df[model.vocabulary[i]]);
        model.idf[i] = std::log((1.0 + n_docs) / (1.0 + d)) + 1.0;
    }
    model.rebuild_index();
    return model;
}

// Raw counts times idf, L2-normalized when nonzero; OOV tokens ignored.
inline std::vector<double> tfidf_transform(const std::vector<std::string>& tokens,
                                           const TfidfModel& model) {
    std::vector<double> row(model.vocabulary.size(), 0.0);
    for (const auto& tok : tokens) {
        auto it = model.index.find(tok);
        if (it != model.index.end()) row[it->second] += 1.0;
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        row[i] *= model.idf[i];
        norm2 += row[i] * row[i];
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : row) v *= inv;
    }
    return row;
}

// ---------------------------------------------------------------------------
// Lexicons

struct Lexicon {
    std::string name;
    std::vector<std::string> dimension_names;
    std::unordered_map<std::string, std::vector<double>> entries; // lowercased word -> scores
};

// CSV format: header "word,dim1,...", one row per word, UTF-8.
inline Lexicon load_lexicon_csv(const std::filesystem::path& path, const std::string& name) {
    Lexicon lex;
    lex.name = name;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line_no == 1) {
            if (cells.size() < 2 || cells[0] != "word")
                throw DataError("lexicon " + path.string() + ": header must be word,dim1,...");
            lex.dimension_names.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != lex.dimension_names.size() + 1)
            throw DataError("lexicon " + path.string() + " line " + std::to_string(line_no) +
                            ": wrong column count");
        std::vector<double> scores;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                scores.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw DataError("lexicon " + path.string() + " line " + std::to_string(line_no) +
                                ": bad number '" + cells[i] + "'");
            }
            if (!std::isfinite(scores.back()))
                throw DataError("lexicon " + path.string() + " line " + std::to_string(line_no) +
                                ": non-finite score");
        }
        std::string word;
        for (char c : cells[0]) word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        lex.entries[word] = std::move(scores);
    }
    if (lex.dimension_names.empty()) throw DataError("lexicon " + path.string() + ": empty file");
    return lex;
}

// Per-dimension mean (or sum) over matched tokens, plus match rate.
// No matches: all dimensions 0 and match rate 0.
inline std::vector<double> lexicon_features(const std::vector<std::string>& tokens,
                                            const Lexicon& lexicon, bool sum_mode = false) {
    std::vector<double> acc(lexicon.dimension_names.size(), 0.0);
    std::size_t matched = 0;
    for (const auto& tok : tokens) {
        auto it = lexicon.entries.find(tok);
        if (it == lexicon.entries.end()) continue;
        ++matched;
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += it->second[d];
    }
    if (matched > 0 && !sum_mode)
        for (double& v : acc) v /= static_cast<double>(matched);
    const double rate = tokens.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(tokens.size());
    acc.push_back(rate);
    return acc;
}

// ---------------------------------------------------------------------------
// Categorical indicators

struct IndicatorSchema {
    std::string category;
    std::vector<std::string> values; // sorted training-set values; unknown column appended
};

inline IndicatorSchema fit_indicator(const std::string& category,
                                     std::span<const ItemRecord* const> train_items) {
    IndicatorSchema schema;
    schema.category = category;
    std::map<std::string, bool> seen;
    for (const ItemRecord* item : train_items) {
        auto it = item->categoricals.find(category);
        if (it != item->categoricals.end()) seen[it->second] = true;
    }
    for (const auto& [value, _] : seen) schema.values.push_back(value);
    return schema;
}

// One-hot over training values; anything unseen (including a missing
// categorical) maps to the trailing unknown column.
inline std::vector<double> indicator_features(const std::map<std::string, std::string>& categoricals,
                                              const IndicatorSchema& schema) {
    std::vector<double> row(schema.values.size() + 1, 0.0);
    auto it = categoricals.find(schema.category);
    if (it == categoricals.end()) {
        row.back() = 1.0;
        return row;
    }
    auto pos = std::lower_bound(schema.values.begin(), schema.values.end(), it->second);
    if (pos != schema.values.end() && *pos == it->second)
        row[static_cast<std::size_t>(pos - schema.values.begin())] = 1.0;
    else
        row.back() = 1.0;
    return row;
}

// ---------------------------------------------------------------------------
// Sentence-score aggregation

inline constexpr std::array<const char*, 7> kAggregateSuffixes = {
    "min", "max", "mean", "range", "p25", "p50", "p75"};

namespace detail {

// Percentile by linear interpolation between closest ranks of the sorted values.
inline double percentile(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

} // namespace detail

// (min, max, mean, range, p25, p50, p75); an empty list yields all zeros.
inline std::array<double, 7> aggregate_sentence_scores(const std::vector<double>& scores) {
    if (scores.empty()) return {0, 0, 0, 0, 0, 0, 0};
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double mn = sorted.front();
    const double mx = sorted.back();
    double mean = 0.0;
    for (double s : sorted) mean += s;
    mean /= static_cast<double>(sorted.size());
    return {mn,
            mx,
            mean,
            mx - mn,
            detail::percentile(sorted, 0.25),
            detail::percentile(sorted, 0.50),
            detail::percentile(sorted, 0.75)};
}

// ---------------------------------------------------------------------------
// Standardization

// Z-scores a column with training-fold mean and population std. Near-constant
// columns are only centered. Exempt columns (TF-IDF, indicators) pass through.
struct Standardizer {
    std::vector<ColumnStats> stats; // one per column; exempt columns keep {0,1}
    std::vector<bool> exempt;

    void fit(const ItemFeatureMatrix& matrix, std::span<const std::size_t> train_rows,
             const std::vector<bool>& exempt_mask) {
        const std::size_t n_cols = matrix.feature_count();
        exempt = exempt_mask;
        stats.assign(n_cols, ColumnStats{});
        if (train_rows.empty()) throw DataError("standardize: no training rows");
        for (std::size_t k = 0; k < n_cols; ++k) {
            if (exempt[k]) continue;
            double mean = 0.0;
            for (std::size_t r : train_rows) mean += matrix.at(r, k);
            mean /= static_cast<double>(train_rows.size());
            double var = 0.0;
            for (std::size_t r : train_rows) {
                const double d = matrix.at(r, k) - mean;
                var += d * d;
            }
            var /= static_cast<double>(train_rows.size());
            stats[k] = {mean, std::sqrt(var)};
        }
    }

    void apply(ItemFeatureMatrix& matrix) const {
        for (std::size_t k = 0; k < matrix.feature_count(); ++k) {
            if (exempt[k]) continue;
            const auto& cs = stats[k];
            const bool scale = cs.std >= 1e-12;
            for (std::size_t r = 0; r < matrix.item_count(); ++r) {
                double v = matrix.at(r, k) - cs.mean;
                if (scale) v /= cs.std;
                matrix.set(r, k, v);
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Pipeline configuration

struct TfidfBlockConfig {
    bool enabled = false;
    std::size_t max_features = 500;
    std::size_t min_df = 1;
    Routing routing = Routing::Both;
};

struct LexiconBlockConfig {
    std::string name;
    std::string path;
    Routing routing = Routing::Both;
    bool sum_mode = false;
};

struct IndicatorBlockConfig {
    std::string category;
    Routing routing = Routing::Both;
};

struct SentenceStatsBlockConfig {
    std::string name; // key into ItemRecord::sentence_scores
    Routing routing = Routing::Both;
};

struct NumericBlockConfig {
    std::string name; // key into ItemRecord::numerics
    Routing routing = Routing::Both;
};

struct FeatureConfig {
    TfidfBlockConfig tfidf;
    std::vector<LexiconBlockConfig> lexicons;
    std::vector<IndicatorBlockConfig> indicators;
    std::vector<SentenceStatsBlockConfig> sentence_stats;
    std::vector<NumericBlockConfig> numerics;
};

inline Routing routing_from_json(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) return Routing::Both;
    return routing_from_string(j.at(key).get<std::string>());
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
    FeatureConfig cfg;
    try {
        if (j.contains("tfidf")) {
            const auto& t = j.at("tfidf");
            cfg.tfidf.enabled = t.value("enabled", true);
            cfg.tfidf.max_features = t.value("max_features", std::size_t{500});
            cfg.tfidf.min_df = t.value("min_df", std::size_t{1});
            cfg.tfidf.routing = routing_from_json(t, "routing");
        }
        for (const auto& l : j.value("lexicons", nlohmann::json::array())) {
            LexiconBlockConfig b;
            b.name = l.at("name").get<std::string>();
            b.path = l.at("path").get<std::string>();
            b.routing = routing_from_json(l, "routing");
            b.sum_mode = l.value("mode", std::string("mean")) == "sum";
            cfg.lexicons.push_back(std::move(b));
        }
        for (const auto& c : j.value("indicators", nlohmann::json::array())) {
            IndicatorBlockConfig b;
            b.category = c.at("category").get<std::string>();
            b.routing = routing_from_json(c, "routing");
            cfg.indicators.push_back(std::move(b));
        }
        for (const auto& s : j.value("sentence_stats", nlohmann::json::array())) {
            SentenceStatsBlockConfig b;
            b.name = s.at("name").get<std::string>();
            b.routing = routing_from_json(s, "routing");
            cfg.sentence_stats.push_back(std::move(b));
        }
        for (const auto& n : j.value("numerics", nlohmann::json::array())) {
            NumericBlockConfig b;
            b.name = n.at("name").get<std::string>();
            b.routing = routing_from_json(n, "routing");
            cfg.numerics.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed feature config: ") + e.what());
    }
    return cfg;
}

inline nlohmann::json feature_config_to_json(const FeatureConfig& cfg) {
    nlohmann::json j;
    j["tfidf"] = {{"enabled", cfg.tfidf.enabled},
                  {"max_features", cfg.tfidf.max_features},
                  {"min_df", cfg.tfidf.min_df},
                  {"routing", to_string(cfg.tfidf.routing)}};
    j["lexicons"] = nlohmann::json::array();
    for (const auto& l : cfg.lexicons)
        j["lexicons"].push_back({{"name", l.name},
                                 {"path", l.path},
                                 {"routing", to_string(l.routing)},
                                 {"mode", l.sum_mode ? "sum" : "mean"}});
    j["indicators"] = nlohmann::json::array();
    for (const auto& c : cfg.indicators)
        j["indicators"].push_back({{"category", c.category}, {"routing", to_string(c.routing)}});
    j["sentence_stats"] = nlohmann::json::array();
    for (const auto& s : cfg.sentence_stats)
        j["sentence_stats"].push_back({{"name", s.name}, {"routing", to_string(s.routing)}});
    j["numerics"] = nlohmann::json::array();
    for (const auto& n : cfg.numerics)
        j["numerics"].push_back({{"name", n.name}, {"routing", to_string(n.routing)}});
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline

// Fits all feature blocks on training-fold items only, then transforms any
// item set with the fitted state. Column order is fixed by the config.
class FeaturePipeline {
public:
    FeaturePipeline() = default;

    explicit FeaturePipeline(FeatureConfig config) : config_(std::move(config)) {
        for (const auto& l : config_.lexicons)
            lexicons_.push_back(load_lexicon_csv(l.path, l.name));
    }

    // Test hook, invoked once per item consumed during fitting.
    std::function<void(std::size_t)> on_fit_item;

    void fit(std::span<const ItemRecord> items, std::span<const std::size_t> train_indices) {
        if (train_indices.empty()) throw DataError("feature fit: no training items");
        for (std::size_t idx : train_indices) {
            if (idx >= items.size()) throw DataError("feature fit: training index out of range");
            if (on_fit_item) on_fit_item(idx);
        }

        if (config_.tfidf.enabled) {
            std::vector<std::vector<std::string>> corpus;
            corpus.reserve(train_indices.size());
            for (std::size_t idx : train_indices) corpus.push_back(tokenize(items[idx].text));
            tfidf_ = fit_tfidf(corpus, config_.tfidf.max_features, config_.tfidf.min_df);
        }

        indicator_schemas_.clear();
        std::vector<const ItemRecord*> train_ptrs;
        for (std::size_t idx : train_indices) train_ptrs.push_back(&items[idx]);
        for (const auto& block : config_.indicators)
            indicator_schemas_.push_back(fit_indicator(block.category, train_ptrs));

        build_schema();

        // Standardization stats come from the raw (unstandardized) training rows.
        ItemFeatureMatrix raw = assemble(items);
        standardizer_.fit(raw, train_indices, exempt_);
        fitted_ = true;
    }

    ItemFeatureMatrix transform(std::span<const ItemRecord> items) const {
        if (!fitted_) throw ConfigError("feature pipeline used before fitting");
        ItemFeatureMatrix matrix = assemble(items);
        standardizer_.apply(matrix);
        if (!matrix.all_finite()) throw DataError("feature transform produced non-finite value");
        return matrix;
    }

    const std::vector<std::string>& feature_names() const { return names_; }
    const std::vector<Routing>& routing() const { return routing_; }
    const TfidfModel& tfidf() const { return tfidf_; }

    std::unordered_map<std::string, ColumnStats> standardization_stats() const {
        std::unordered_map<std::string, ColumnStats> out;
        for (std::size_t k = 0; k < names_.size(); ++k)
            if (!exempt_[k]) out[names_[k]] = standardizer_.stats[k];
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config"] = feature_config_to_json(config_);
        nlohmann::json vocab = nlohmann::json::object();
        for (std::size_t i = 0; i < tfidf_.vocabulary.size(); ++i)
            vocab[tfidf_.vocabulary[i]] = tfidf_.idf[i];
        j["tfidf_vocabulary"] = vocab;
        nlohmann::json schemas = nlohmann::json::object();
        for (const auto& s : indicator_schemas_) schemas[s.category] = s.values;
        j["indicator_values"] = schemas;
        nlohmann::json stats = nlohmann::json::object();
        for (std::size_t k = 0; k < names_.size(); ++k)
            if (!exempt_[k])
                stats[names_[k]] = {{"mean", standardizer_.stats[k].mean},
                                    {"std", standardizer_.stats[k].std}};
        j["standardization"] = stats;
        return j;
    }

    static FeaturePipeline from_json(const nlohmann::json& j) {
        FeaturePipeline p;
        try {
            p.config_ = feature_config_from_json(j.at("config"));
            for (const auto& l : p.config_.lexicons)
                p.lexicons_.push_back(load_lexicon_csv(l.path, l.name));
            for (const auto& [word, idf] : j.at("tfidf_vocabulary").items()) {
                p.tfidf_.vocabulary.push_back(word);
                p.tfidf_.idf.push_back(idf.get<double>());
            }
            p.tfidf_.rebuild_index();
            for (const auto& block : p.config_.indicators) {
                IndicatorSchema schema;
                schema.category = block.category;
                schema.values =
                    j.at("indicator_values").at(block.category).get<std::vector<std::string>>();
                p.indicator_schemas_.push_back(std::move(schema));
            }
            p.build_schema();
            p.standardizer_.exempt = p.exempt_;
            p.standardizer_.stats.assign(p.names_.size(), ColumnStats{});
            const auto& stats = j.at("standardization");
            for (std::size_t k = 0; k < p.names_.size(); ++k) {
                if (p.exempt_[k]) continue;
                const auto& s = stats.at(p.names_[k]);
                p.standardizer_.stats[k] = {s.at("mean").get<double>(), s.at("std").get<double>()};
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed pipeline state: ") + e.what());
        }
        p.fitted_ = true;
        return p;
    }

private:
    void build_schema() {
        names_.clear();
        routing_.clear();
        exempt_.clear();
        auto add = [&](const std::string& name, Routing r, bool exempt) {
            names_.push_back(name);
            routing_.push_back(r);
            exempt_.push_back(exempt);
        };
        if (config_.tfidf.enabled)
            for (const auto& word : tfidf_.vocabulary)
                add("tfidf:" + word, config_.tfidf.routing, true);
        for (std::size_t li = 0; li < config_.lexicons.size(); ++li) {
            const auto& block = config_.lexicons[li];
            for (const auto& dim : lexicons_[li].dimension_names)
                add(block.name + "_" + dim, block.routing, false);
            add(block.name + "_match_rate", block.routing, false);
        }
        for (std::size_t ci = 0; ci < config_.indicators.size(); ++ci) {
            const auto& block = config_.indicators[ci];
            for (const auto& value : indicator_schemas_[ci].values)
                add(block.category + "=" + value, block.routing, true);
            add(block.category + "=__unknown__", block.routing, true);
        }
        for (const auto& block : config_.sentence_stats)
            for (const char* suffix : kAggregateSuffixes)
                add(block.name + "_" + suffix, block.routing, false);
        for (const auto& block : config_.numerics) add(block.name, block.routing, false);

        std::map<std::string, bool> seen;
        for (const auto& name : names_)
            if (seen[name]) throw ConfigError("duplicate feature name: " + name);
            else seen[name] = true;
    }

    ItemFeatureMatrix assemble(std::span<const ItemRecord> items) const {
        ItemFeatureMatrix matrix(names_, routing_, items.size());
        for (std::size_t r = 0; r < items.size(); ++r) {
            const ItemRecord& item = items[r];
            std::size_t col = 0;
            std::vector<std::string> tokens;
            if (config_.tfidf.enabled || !config_.lexicons.empty()) tokens = tokenize(item.text);

            if (config_.tfidf.enabled) {
                const auto row = tfidf_transform(tokens, tfidf_);
                for (double v : row) matrix.set(r, col++, v);
            }
            for (std::size_t li = 0; li < config_.lexicons.size(); ++li) {
                const auto row = lexicon_features(tokens, lexicons_[li], config_.lexicons[li].sum_mode);
                for (double v : row) matrix.set(r, col++, v);
            }
            for (std::size_t ci = 0; ci < config_.indicators.size(); ++ci) {
                const auto row = indicator_features(item.categoricals, indicator_schemas_[ci]);
                for (double v : row) matrix.set(r, col++, v);
            }
            for (const auto& block : config_.sentence_stats) {
                auto it = item.sentence_scores.find(block.name);
                const auto agg = aggregate_sentence_scores(
                    it == item.sentence_scores.end() ? std::vector<double>{} : it->second);
                for (double v : agg) matrix.set(r, col++, v);
            }
            for (const auto& block : config_.numerics) {
                auto it = item.numerics.find(block.name);
                if (it == item.numerics.end())
                    throw DataError("item '" + item.item_id + "' missing numeric feature '" +
                                    block.name + "'");
                matrix.set(r, col++, it->second);
            }
        }
        return matrix;
    }

    FeatureConfig config_;
    std::vector<Lexicon> lexicons_;
    TfidfModel tfidf_;
    std::vector<IndicatorSchema> indicator_schemas_;
    Standardizer standardizer_;
    std::vector<std::string> names_;
    std::vector<Routing> routing_;
    std::vector<bool> exempt_;
    bool fitted_ = false;
};

} // namespace pirt

#endif
