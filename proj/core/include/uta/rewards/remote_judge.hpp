#pragma once

#include "uta/rewards/rewards.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace uta::rewards {

struct RemoteJudgeOptions {
    std::string base_url;  // empty: UTA_BASE_URL
    std::string api_key;   // empty: UTA_API_KEY
    std::string model;
    std::chrono::milliseconds timeout{60000};
    int max_in_flight = 4;
};

/// LLM judge over a chat-completions endpoint. The model is asked for
/// {"facts": n}; the first such object (or first integer) in the reply is
/// the count. Transport failures throw a retriable BackendError; total_reward
/// owns the retry loop.
class RemoteJudge : public Judge {
public:
    explicit RemoteJudge(RemoteJudgeOptions options);
    ~RemoteJudge() override;
    std::int64_t count_facts(const env::Trajectory& traj) override;

private:
    struct State;
    RemoteJudgeOptions options_;
    std::unique_ptr<State> state_;
};

/// Reads the fact count out of a judge reply.
std::int64_t parse_fact_count(const std::string& reply);

}  // namespace uta::rewards
