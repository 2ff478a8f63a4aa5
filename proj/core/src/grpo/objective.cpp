#include "uta/grpo/objective.hpp"

#include "uta/error.hpp"

#include <algorithm>
#include <cmath>

namespace uta::grpo {

void GrpoConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (steps < 1 || epochs < 1) throw ConfigError("steps and epochs must be >= 1");
    if (groups < 1) throw ConfigError("groups must be >= 1");
    if (rollouts < 2) throw ConfigError("rollouts per group must be >= 2");
}

std::vector<double> compute_advantages(std::span<const double> rewards) {
    const std::size_t n = rewards.size();
    if (n < 2) {
        throw DomainError("advantages need a group of at least two rollouts");
    }
    double mean = 0.0;
    for (const double r : rewards) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (rewards[i] - mean) / (sd + kAdvantageEps);
    }
    return out;
}

double clipped_term(double ratio, double advantage, double epsilon) {
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

double grpo_step_loss(std::span<const double> ratios, std::span<const double> advantages, double kl_value,
                      double epsilon, double beta, std::span<const std::string> labels) {
    if (ratios.size() != advantages.size()) {
        throw DomainError("ratios and advantages differ in length");
    }
    if (ratios.empty()) {
        return -beta * kl_value;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (!std::isfinite(ratios[i]) || ratios[i] <= 0.0) {
            const std::string who = i < labels.size() ? labels[i] : "entry " + std::to_string(i);
            throw DomainError("non-finite or nonpositive ratio for " + who);
        }
        sum += clipped_term(ratios[i], advantages[i], epsilon);
    }
    return sum / static_cast<double>(ratios.size()) - beta * kl_value;
}

double categorical_kl(std::span<const double> p, std::span<const double> q, double floor) {
    if (p.size() != q.size()) {
        throw DomainError("KL needs distributions over the same menu");
    }
    double kl = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        if (p[a] <= 0.0) continue;
        kl += p[a] * (std::log(std::max(p[a], floor)) - std::log(std::max(q[a], floor)));
    }
    return std::max(kl, 0.0);
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

}  // namespace uta::grpo
