#pragma once

#include "uta/policy/policy.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace uta::policy {

struct RemotePolicyOptions {
    std::string base_url;  // empty: UTA_BASE_URL
    std::string api_key;   // empty: UTA_API_KEY (may stay empty for local servers)
    std::string model;
    double temperature = 0.7;
    int top_logprobs = 1;
    int max_tokens = 1024;
    int max_attempts = 3;
    std::chrono::milliseconds backoff{200};
    std::chrono::milliseconds timeout{60000};
    int max_in_flight = 4;
    /// Base of the provider's logprobs: e (natural), 2 or 10.
    double logprob_base = 0.0;  // 0 means natural log
    /// Re-score the message through the completions endpoint (echo) when the
    /// chat response's tokens do not reproduce the message text.
    bool echo_rescore = true;
    std::size_t history_result_chars = 2000;
    std::string system_prompt;  // empty: built-in prompt
};

/// Resolves base URL and key from the environment where unset.
RemotePolicyOptions resolve_remote_options(RemotePolicyOptions options);

/// Chat-completions backend that requests token logprobs for every proposal.
/// Shareable across threads; concurrent requests are capped at
/// max_in_flight.
class RemotePolicy : public Policy {
public:
    explicit RemotePolicy(RemotePolicyOptions options);
    ~RemotePolicy() override;

    std::unique_ptr<PolicySession> start(const env::TaskSpec& task, std::uint64_t seed, int rollout) override;
    std::string name() const override { return "remote"; }

    const RemotePolicyOptions& options() const noexcept { return options_; }

    /// One model call; public for the session and for tests.
    ActionProposal complete(const PromptContext& ctx, std::uint64_t seed);

    /// Messages sent for a context (system + one user turn).
    nlohmann::json build_messages(const PromptContext& ctx) const;

private:
    struct State;
    RemotePolicyOptions options_;
    std::unique_ptr<State> state_;
};

}  // namespace uta::policy
