#pragma once

#include "uta/environment/database.hpp"
#include "uta/environment/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::rewards {

/// min(1, ln(10x + 1) / ln 31).
double r_code(std::int64_t x);

/// min(c / 20, 1).
double r_judge(std::int64_t c);

/// 1 / u_perp; an absent summary (no perplexity) scores 0.
double r_conf(std::optional<double> u_perp);

/// Steps running SQL or code that succeeded. Schema lookups do not count.
std::int64_t count_correct_executions(const env::Trajectory& traj);

enum class ScheduleKind { zero, base, phase, step, adapt };
const char* to_string(ScheduleKind kind) noexcept;
ScheduleKind parse_schedule(std::string_view name);  // ConfigError on unknown names
inline constexpr ScheduleKind kAllSchedules[] = {ScheduleKind::zero, ScheduleKind::base, ScheduleKind::phase,
                                                 ScheduleKind::step, ScheduleKind::adapt};

struct ScheduleParams {
    double alpha_code = 1.0;
    double alpha_judge = 4.0;
    double base_conf = 1.0 / 3.0;
    double step_boost = 2.0;
    int step_period = 10;
    int phase_boundary = 50;
    double adapt_peak = 2.0;
    double adapt_sharpness = 50.0;
    double adapt_center = 0.5;
};

struct Weights {
    double code = 0.0;
    double judge = 0.0;
    double conf = 0.0;
    bool operator==(const Weights&) const = default;
};

/// Weights for training step t >= 1. `r_judge_value` only matters for adapt.
Weights schedule_weights(ScheduleKind kind, int t, double r_judge_value, const ScheduleParams& params = {});

/// Counts grounded facts in a trajectory's summary. Remote judges throw
/// BackendError (retriable) on transport failure.
class Judge {
public:
    virtual ~Judge() = default;
    virtual std::int64_t count_facts(const env::Trajectory& traj) = 0;
};

/// A summary line "<table>.<column> = <value>" (optionally led by "- " or
/// "* ") parsed into its parts.
struct FactTriple {
    std::string table;
    std::string column;
    std::string value;
    auto operator<=>(const FactTriple&) const = default;
};
std::optional<FactTriple> parse_fact_line(std::string_view line);

/// True when some row of `table` has `column` equal to `value` (compared as
/// rendered text, case-sensitive table and column lookup).
bool fact_grounded(const env::DatabaseHandle& db, const FactTriple& fact);

/// Splits a summary into nonblank lines.
std::vector<std::string> summary_lines(std::string_view summary);

/// Counts distinct summary lines that quote a triple present in the
/// database. Uncommitted trajectories count 0.
class MockJudge : public Judge {
public:
    explicit MockJudge(env::DatabaseHandle db) : db_(std::move(db)) {}
    std::int64_t count_facts(const env::Trajectory& traj) override;

private:
    env::DatabaseHandle db_;
};

enum class ConfidenceKind { perplexity, token_entropy, retrieval_variance };
const char* to_string(ConfidenceKind kind) noexcept;
ConfidenceKind parse_confidence(std::string_view name);

struct RewardOptions {
    ScheduleParams schedule;
    ConfidenceKind confidence = ConfidenceKind::perplexity;
    /// Vocabulary-size proxy for the token-entropy signal.
    double vocab_size = 32000.0;
    int judge_max_retries = 3;
    /// When set, adapt uses this value (e.g. a running mean) instead of the
    /// trajectory's own r_judge.
    std::optional<double> adapt_r_judge;
};

struct RewardBreakdown {
    std::int64_t x = 0;
    std::int64_t c = 0;
    double r_code = 0.0;
    double r_judge = 0.0;
    double r_conf = 0.0;
    std::optional<double> u_perp;
    Weights weights;
    double total = 0.0;
};

nlohmann::json to_json(const RewardBreakdown& r);

/// Experimental confidence signal: 1 - min(1, mean surprisal / ln V) over the
/// summary tokens; 0 without a summary.
double token_entropy_confidence(const env::Trajectory& traj, double vocab_size);

/// Experimental confidence signal: 1 / (1 + population variance of the
/// number of tables touched across the mini-rollouts).
double retrieval_variance_confidence(std::span<const env::Trajectory> mini_rollouts);

/// Scores one finished trajectory. Returns nullopt when the judge kept
/// failing; the reason is appended to `warnings`. `mini_rollouts` feeds the
/// retrieval-variance signal only.
std::optional<RewardBreakdown> total_reward(const env::Trajectory& traj, ScheduleKind kind, int t, Judge& judge,
                                            const RewardOptions& options = {},
                                            std::vector<std::string>* warnings = nullptr,
                                            std::span<const env::Trajectory> mini_rollouts = {});

}  // namespace uta::rewards
