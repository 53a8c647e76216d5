#ifndef PIRT_ANALYSIS_HPP
#define PIRT_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pirt/io.hpp"
#include "pirt/model_io.hpp"

namespace pirt {

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3)
        throw DataError("pearson: inputs must have equal length >= 3");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: constant input vector");
    return sxy / std::sqrt(sxx * syy);
}

namespace detail {

// Continued-fraction evaluation of the regularized incomplete beta I_x(a, b).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

} // namespace detail

// Two-sided p-value for a Pearson r under the t distribution with n-2 df.
inline double pearson_p_value(double r, std::size_t n) {
    if (n < 3) throw DataError("pearson p-value needs n >= 3");
    const double df = static_cast<double>(n - 2);
    if (std::abs(r) >= 1.0) return 0.0;
    const double t2 = r * r * df / (1.0 - r * r);
    return detail::incomplete_beta(df / 2.0, 0.5, df / (df + t2));
}

// ---------------------------------------------------------------------------

struct AbilityRow {
    std::string respondent_id;
    double ability = 0.0;
};

// Respondent embedding table, sorted by ability descending.
inline std::vector<AbilityRow> export_abilities(const ModelParameters& params,
                                                const std::vector<std::string>& respondent_ids) {
    if (params.abilities.size() != respondent_ids.size())
        throw ConfigError("export_abilities: id/ability length mismatch");
    std::vector<AbilityRow> rows;
    rows.reserve(respondent_ids.size());
    for (std::size_t i = 0; i < respondent_ids.size(); ++i)
        rows.push_back({respondent_ids[i], params.abilities[i]});
    std::stable_sort(rows.begin(), rows.end(),
                     [](const AbilityRow& a, const AbilityRow& b) { return a.ability > b.ability; });
    return rows;
}

inline std::string abilities_to_csv(const std::vector<AbilityRow>& rows) {
    std::string out = "respondent_id,ability\n";
    for (const auto& r : rows) out += csv_field(r.respondent_id) + "," + format_double(r.ability) + "\n";
    return out;
}

// The 2PL likelihood is invariant under jointly negating abilities and
// phi weights; pick the branch that correlates non-negatively with the
// reference before any comparison.
inline std::vector<double> sign_align(std::span<const double> fitted,
                                      std::span<const double> reference) {
    if (fitted.size() != reference.size())
        throw ConfigError("sign_align: length mismatch");
    const double r = pearson(fitted, reference);
    std::vector<double> out(fitted.begin(), fitted.end());
    if (r < 0.0)
        for (double& v : out) v = -v;
    return out;
}

// ---------------------------------------------------------------------------

struct WeightRow {
    std::string feature_name;
    bool has_beta = false;
    bool has_phi = false;
    double beta_weight = 0.0;
    double phi_weight = 0.0;
};

// Full feature-weight table; beta/phi cells populated per routing.
inline std::vector<WeightRow> weight_report(const FittedModel& model) {
    std::vector<WeightRow> rows;
    std::size_t bi = 0, pi = 0;
    for (std::size_t k = 0; k < model.feature_names.size(); ++k) {
        WeightRow row;
        row.feature_name = model.feature_names[k];
        if (model.routing[k] != Routing::PhiOnly) {
            row.has_beta = true;
            row.beta_weight = model.params.beta_weights[bi++];
        }
        if (model.routing[k] != Routing::BetaOnly) {
            row.has_phi = model.params.kind == ModelKind::TwoPL;
            if (row.has_phi) row.phi_weight = model.params.phi_weights[pi];
            ++pi;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// Top-k rows by |weight| on the chosen parameter, dropping magnitudes below
// min_fraction of the largest.
inline std::vector<WeightRow> top_weights(const std::vector<WeightRow>& rows, bool by_phi,
                                          std::size_t k, bool highest = true,
                                          double min_fraction = 0.01) {
    std::vector<WeightRow> filtered;
    double max_abs = 0.0;
    for (const auto& r : rows) {
        if (by_phi ? !r.has_phi : !r.has_beta) continue;
        max_abs = std::max(max_abs, std::abs(by_phi ? r.phi_weight : r.beta_weight));
    }
    for (const auto& r : rows) {
        if (by_phi ? !r.has_phi : !r.has_beta) continue;
        if (std::abs(by_phi ? r.phi_weight : r.beta_weight) >= min_fraction * max_abs)
            filtered.push_back(r);
    }
    std::stable_sort(filtered.begin(), filtered.end(), [&](const WeightRow& a, const WeightRow& b) {
        const double wa = by_phi ? a.phi_weight : a.beta_weight;
        const double wb = by_phi ? b.phi_weight : b.beta_weight;
        return highest ? wa > wb : wa < wb;
    });
    if (filtered.size() > k) filtered.resize(k);
    return filtered;
}

inline std::string weights_to_csv(const std::vector<WeightRow>& rows) {
    std::string out = "feature_name,beta_weight,phi_weight\n";
    for (const auto& r : rows) {
        out += csv_field(r.feature_name) + ",";
        out += (r.has_beta ? format_double(r.beta_weight) : std::string{}) + ",";
        out += (r.has_phi ? format_double(r.phi_weight) : std::string{}) + "\n";
    }
    return out;
}

// Correlation of the respondent embedding against external covariate columns.
struct CorrelationRow {
    std::string covariate;
    double r = 0.0;
    double p = 0.0;
    std::size_t n = 0;
};

inline std::string correlations_to_csv(const std::vector<CorrelationRow>& rows) {
    std::string out = "covariate,pearson_r,p_value,n\n";
    for (const auto& row : rows)
        out += csv_field(row.covariate) + "," + format_double(row.r) + "," + format_double(row.p) +
               "," + std::to_string(row.n) + "\n";
    return out;
}

} // namespace pirt

#endif
