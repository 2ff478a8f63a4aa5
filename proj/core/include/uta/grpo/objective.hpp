#pragma once

#include <span>
#include <string>
#include <vector>

namespace uta::grpo {

inline constexpr double kAdvantageEps = 1e-8;
inline constexpr double kProbabilityFloor = 1e-6;

struct GrpoConfig {
    double epsilon = 0.2;
    double beta = 0.01;
    double learning_rate = 0.05;  // toy scale; see README
    int steps = 100;
    int groups = 3;
    int rollouts = 4;
    int epochs = 4;

    void validate() const;  // ConfigError on out-of-range values
};

/// (R_i - mean) / (population std + 1e-8). Throws DomainError for fewer
/// than two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards);

/// min(r A, clip(r, 1 - eps, 1 + eps) A).
double clipped_term(double ratio, double advantage, double epsilon);

/// Mean of clipped_term over paired (ratio, advantage) entries minus
/// beta * kl_value. Throws DomainError for a non-finite or nonpositive
/// ratio, naming labels[i] when labels are given.
double grpo_step_loss(std::span<const double> ratios, std::span<const double> advantages, double kl_value,
                      double epsilon, double beta, std::span<const std::string> labels = {});

/// sum_a p_a (ln max(p_a, floor) - ln max(q_a, floor)).
double categorical_kl(std::span<const double> p, std::span<const double> q, double floor = kProbabilityFloor);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace uta::grpo
