#pragma once

#include "uta/environment/tools.hpp"
#include "uta/grpo/objective.hpp"
#include "uta/policy/policy.hpp"
#include "uta/rewards/rewards.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace uta::grpo {

struct ToyEnvOptions {
    int tables = 10;
    int relevant = 3;
    int tasks = 4;
    int rows_per_table = 5;
    int facts_per_table = 5;
    std::uint64_t seed = 7;
};

/// Synthetic database of `tables` tables (t00, t01, ...) of which a seeded
/// subset is relevant to every task.
struct ToyEnvironment {
    env::DatabaseHandle db;
    std::vector<env::TaskSpec> tasks;
    std::set<std::string> relevant;
    std::vector<std::string> table_names;
    int facts_per_table = 5;
};

ToyEnvironment make_toy_environment(const ToyEnvOptions& options = {});

/// facts_per_table for each relevant table the trajectory touched, zero
/// unless it committed.
class ToyJudge : public rewards::Judge {
public:
    ToyJudge(std::set<std::string> relevant, int facts_per_table)
        : relevant_(std::move(relevant)), facts_(facts_per_table) {}
    std::int64_t count_facts(const env::Trajectory& traj) override;

private:
    std::set<std::string> relevant_;
    int facts_;
};

/// Tabular softmax policy. The state is (task, step index); the menu is one
/// "query table" action per table plus commit. Logits are laid out as
/// theta[(task * max_calls + step) * actions + action].
///
/// Each committed summary lists the tables touched, and every summary token
/// carries ln p(commit | state), so the summary perplexity is 1 / p(commit).
class ToyPolicy : public policy::Policy {
public:
    ToyPolicy(std::vector<std::string> task_ids, std::vector<std::string> tables, int max_calls);

    std::unique_ptr<policy::PolicySession> start(const env::TaskSpec& task, std::uint64_t seed, int rollout) override;
    std::string name() const override { return "toy"; }

    std::size_t num_actions() const noexcept { return tables_.size() + 1; }
    std::size_t commit_action() const noexcept { return tables_.size(); }
    std::size_t num_tasks() const noexcept { return task_ids_.size(); }
    int max_calls() const noexcept { return max_calls_; }
    std::size_t task_index(const std::string& task_id) const;
    /// Menu index of an action; throws DomainError for off-menu actions.
    std::size_t action_index(const env::Action& action) const;
    const std::vector<std::string>& tables() const noexcept { return tables_; }
    const std::vector<std::string>& task_ids() const noexcept { return task_ids_; }

    std::size_t offset(std::size_t task, std::size_t step) const noexcept {
        return (task * static_cast<std::size_t>(max_calls_) + step) * num_actions();
    }
    std::vector<double> probs(std::size_t task, std::size_t step) const;
    std::vector<double> probs(const std::vector<double>& theta, std::size_t task, std::size_t step) const;

    std::vector<double>& theta() noexcept { return theta_; }
    const std::vector<double>& theta() const noexcept { return theta_; }
    const std::vector<double>& reference() const noexcept { return reference_; }
    void set_theta(std::vector<double> theta);
    /// Freezes the current parameters as the reference.
    void freeze_reference() { reference_ = theta_; }

    void save_checkpoint(const std::filesystem::path& path) const;
    static ToyPolicy load_checkpoint(const std::filesystem::path& path);

private:
    std::vector<std::string> task_ids_;
    std::vector<std::string> tables_;
    int max_calls_;
    std::vector<double> theta_;
    std::vector<double> reference_;
};

/// One decision of a collected rollout.
struct Decision {
    std::size_t task = 0;
    std::size_t step = 0;
    std::size_t action = 0;
    double old_logprob = 0.0;
    double advantage = 0.0;
    std::string label;  // trajectory id and step
};

struct ObjectiveValue {
    double value = 0.0;
    double kl = 0.0;
    std::vector<double> gradient;  // d value / d theta
};

/// Mean over decisions of the clipped surrogate minus beta times the mean
/// KL to the reference over the same visited states, with the analytic
/// gradient.
ObjectiveValue toy_objective(const ToyPolicy& policy, const std::vector<double>& theta,
                             const std::vector<Decision>& decisions, double epsilon, double beta);

/// Mean exact KL(pi_theta || pi_ref) over the states in `decisions`.
double mean_kl(const ToyPolicy& policy, const std::vector<Decision>& decisions);

struct CurvePoint {
    int step = 0;
    double mean_reward = 0.0;
    double r_code = 0.0;
    double r_judge = 0.0;
    double conf_proxy = 0.0;  // mean r_conf = mean 1/u_perp, 0 for uncommitted
    double kl = 0.0;
    double alpha_conf = 0.0;  // mean schedule weight used this step
    int dropped = 0;          // rollouts dropped after judge failures
};

struct TrainOptions {
    GrpoConfig grpo;
    rewards::ScheduleKind schedule = rewards::ScheduleKind::zero;
    rewards::RewardOptions reward;
    /// Adapt reads a running mean of r_judge instead of each trajectory's own.
    bool adapt_running_mean = false;
    int max_calls = 6;
    std::uint64_t seed = 7;
    int jobs = 1;
    ToyEnvOptions env;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    ToyPolicy policy;
    std::vector<std::string> warnings;
};

/// Seeded GRPO on the toy environment. Throws DomainError when parameters
/// become non-finite. `judge` defaults to a ToyJudge for the environment.
TrainResult train_toy(const TrainOptions& options, rewards::Judge* judge = nullptr);

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace uta::grpo
