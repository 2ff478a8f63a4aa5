#pragma once

#include "uta/environment/database.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::eval {

struct ScoredItem {
    double uncertainty = 0.0;
    double quality = 0.0;  // in [0, 1]
};

struct ClaimRecord {
    std::string text;
    bool correct = false;
    bool useful = false;
};

nlohmann::json to_json(const ClaimRecord& c);
ClaimRecord claim_from_json(const nlohmann::json& j);

struct QualitySummary {
    std::int64_t claims = 0;  // Q1
    double correct_ratio = 0.0;  // Q2
    double useful_ratio = 0.0;   // Q3
    bool undefined = false;      // no claims; ratios reported as 0
};

QualitySummary aggregate_quality(std::span<const ClaimRecord> claims);

enum class Ordering { by_uncertainty, oracle, random };

/// Point k (k = 0..N-1) is the mean quality after rejecting the k items the
/// ordering ranks worst. by_uncertainty rejects the highest uncertainty
/// first, oracle the lowest quality first. Tied items are rejected in
/// random order and the point is its expectation, so a constant uncertainty
/// gives a flat curve. random is flat at the overall mean.
std::vector<double> rejection_curve(std::span<const ScoredItem> items, Ordering ordering);

/// Mean of the curve's points.
double curve_auc(std::span<const double> curve);

/// Prediction rejection ratio. nullopt when N < 2 or the oracle and random
/// areas coincide.
std::optional<double> prr(std::span<const ScoredItem> items);

struct SurvivalRecord {
    std::string id;
    double score = 0.0;  // higher = longer predicted survival
    double time = 0.0;
    bool event = false;
};

/// Harrell's concordance. nullopt without comparable pairs.
std::optional<double> c_index(std::span<const SurvivalRecord> records);

/// Pearson correlation; nullopt for fewer than 2 points or zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Mock claim extraction: every nonblank summary line is a claim. A claim is
/// correct when it quotes a (table, column, value) triple present in the
/// database, and useful when it is also about a table the trajectory touched.
std::vector<ClaimRecord> mock_claims(const env::DatabaseHandle& db, std::string_view summary,
                                     const std::set<std::string>& tables_touched);

/// Survival records from CSV with header id,score,time,event.
std::vector<SurvivalRecord> read_survival_csv(const std::string& path);

}  // namespace uta::eval
