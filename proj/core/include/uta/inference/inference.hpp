#pragma once

#include "uta/environment/tools.hpp"
#include "uta/environment/trajectory.hpp"
#include "uta/evaluation/evaluation.hpp"
#include "uta/policy/policy.hpp"
#include "uta/uncertainty/uncertainty.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::infer {

inline constexpr const char* kRecordSchema = "uta.inference.record/1";
inline constexpr const char* kAggregateSchema = "uta.inference.aggregate/1";

struct InferenceConfig {
    int k = 5;
    double kappa = 0.5;
    int max_calls = 6;
    std::uint64_t seed = 1;
    /// Optional explicit per-rollout base seeds (size k).
    std::vector<std::uint64_t> seeds;
    int repeats = 5;
    int jobs = 1;

    void validate() const;  // ConfigError
};

/// Seed of rollout k for (task, repeat).
std::uint64_t rollout_seed(const InferenceConfig& cfg, const std::string& task_id, int repeat, int k);

struct FilterDecision {
    bool emit = false;
    std::string reason;  // "emit", "threshold" or "no-summary"
    double threshold = 0.0;  // 2 kappa
    std::optional<std::size_t> index;  // emitted rollout
    std::optional<double> u_perp;
    std::optional<double> u_cocoa;
    double u_ret = 0.0;
};

/// Abstain when no rollout committed or u_ret + u_CoCoA > 2 kappa; else emit
/// the lowest-perplexity candidate (lowest index on ties).
FilterDecision filter(const uq::UncertaintyReport& report, double kappa);

struct InferenceResult {
    std::vector<env::Trajectory> trajectories;
    uq::UncertaintyReport report;
};

/// K independent episodes with distinct seeds, then the uncertainty report.
InferenceResult infer(const env::TaskSpec& task, const env::Environment& environment, policy::Policy& policy,
                      const InferenceConfig& cfg, int repeat = 0, const uq::SimilarityFn& sim = uq::token_f1);

/// Claims for a summary; the default is eval::mock_claims over the database.
using ClaimFn = std::function<std::vector<eval::ClaimRecord>(const env::Trajectory&)>;

struct BatchOutputs {
    std::ostream* report = nullptr;        // records then one aggregate line
    std::ostream* trajectories = nullptr;  // optional sidecar, one trajectory per line
};

struct BatchSummary {
    std::size_t records = 0;
    std::size_t errors = 0;
    nlohmann::json aggregate;
};

/// One record per (task, repeat) plus an aggregate line. A failing unit is
/// recorded with decision "error" and the run continues.
BatchSummary batch_infer(const std::vector<env::TaskSpec>& tasks, const env::Environment& environment,
                         policy::Policy& policy, const InferenceConfig& cfg, const BatchOutputs& outputs,
                         const ClaimFn& claims = nullptr, const uq::SimilarityFn& sim = uq::token_f1);

struct ReportFile {
    std::vector<nlohmann::json> records;
    std::optional<nlohmann::json> aggregate;
};
ReportFile read_report(const std::filesystem::path& path);

struct SweepRow {
    double kappa = 0.0;
    std::size_t records = 0;
    std::size_t emitted = 0;
    double coverage = 0.0;
    double abstention_rate = 0.0;
    std::optional<double> emitted_quality;  // mean correct-claim ratio over emitted records with claims
};

/// Re-applies the filter to each record's stored uncertainty at each kappa.
std::vector<SweepRow> sweep_kappa(const std::vector<nlohmann::json>& records, const std::vector<double>& kappas);

/// Recomputes every record's uncertainty block from the trajectory sidecar
/// and returns one message per mismatch (empty when all agree exactly).
std::vector<std::string> verify_report(const std::filesystem::path& report,
                                       const std::filesystem::path& trajectories,
                                       const uq::SimilarityFn& sim = uq::token_f1);

/// Items for PRR: uncertainty = u_ret + u_CoCoA, quality = correct-claim
/// ratio. Records without claims or without a candidate are skipped.
std::vector<eval::ScoredItem> scored_items(const std::vector<nlohmann::json>& records);

}  // namespace uta::infer
