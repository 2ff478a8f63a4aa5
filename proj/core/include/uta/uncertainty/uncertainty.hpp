#pragma once

#include "uta/environment/trajectory.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::uq {

/// exp(-mean(logprobs)). Throws DomainError on an empty list or a positive
/// entry.
double perplexity(std::span<const double> logprobs);

/// Similarity in [0, 1] between two summaries.
using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

/// F1 overlap of lowercased whitespace tokens (multiset). Two empty texts
/// score 1.
double token_f1(std::string_view a, std::string_view b);

/// 1 - mean_k sim(samples[k], star). Throws DomainError when samples is
/// empty (fewer than two candidates in total).
double consistency(std::string_view star, std::span<const std::string> samples, const SimilarityFn& sim);

double cocoa(double u_perp_star, double u_cons);

/// Binary entropy in bits, 0 ln 0 = 0.
double binary_entropy(double p);

struct RetrievalStats {
    int k = 0;
    std::map<std::string, double> freq;  // candidate set = keys
    double u_ret = 0.0;
    bool empty_candidates = false;
};

RetrievalStats retrieval_entropy(std::span<const std::set<std::string>> touched);
RetrievalStats retrieval_entropy(std::span<const env::Trajectory> trajectories);

struct UncertaintyReport {
    std::vector<std::optional<double>> u_perp;  // per rollout; empty when uncommitted
    std::optional<std::size_t> star_index;       // argmin perplexity, lowest index on ties
    std::optional<double> u_cons;
    std::optional<double> u_cocoa;
    double u_ret = 0.0;
    std::map<std::string, double> freq;
    std::vector<std::string> flags;  // "empty-candidates", "no-summary", "single-candidate"
    std::size_t pool_size = 0;       // committed candidates

    bool has_flag(std::string_view f) const;
};

/// Retrieval entropy over all rollouts plus CoCoA over the committed ones.
/// A lone committed candidate gets u_cons = 1 and the "single-candidate" flag.
UncertaintyReport compute_report(std::span<const env::Trajectory> trajectories, const SimilarityFn& sim = token_f1);

nlohmann::json to_json(const UncertaintyReport& r);
UncertaintyReport uncertainty_from_json(const nlohmann::json& j);

}  // namespace uta::uq
