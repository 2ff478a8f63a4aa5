#include "uta/rewards/remote_judge.hpp"

#include "http.hpp"
#include "uta/error.hpp"

#include <cctype>
#include <cstdlib>
#include <semaphore>

namespace uta::rewards {

using nlohmann::json;

namespace {

constexpr const char* kJudgePrompt =
    "Count the grounded, non-overlapping atomic facts in the summary that are supported by the tool results. "
    "Reply with JSON {\"facts\": N} only.";

std::string env_or(const std::string& v, const char* var) {
    if (!v.empty()) return v;
    const char* e = std::getenv(var);
    return e != nullptr ? e : "";
}

}  // namespace

struct RemoteJudge::State {
    explicit State(int cap) : in_flight(cap) {}
    detail::HttpTarget target;
    std::counting_semaphore<1024> in_flight;
};

RemoteJudge::RemoteJudge(RemoteJudgeOptions o) : options_(std::move(o)) {
    options_.base_url = env_or(options_.base_url, "UTA_BASE_URL");
    options_.api_key = env_or(options_.api_key, "UTA_API_KEY");
    if (options_.base_url.empty()) throw ConfigError("remote judge needs a base URL");
    if (options_.model.empty()) throw ConfigError("remote judge needs a model name");
    if (options_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    state_ = std::make_unique<State>(std::min(options_.max_in_flight, 1024));
    state_->target = detail::parse_base_url(options_.base_url);
}

RemoteJudge::~RemoteJudge() = default;

std::int64_t parse_fact_count(const std::string& reply) {
    for (std::size_t pos = reply.find('{'); pos != std::string::npos; pos = reply.find('{', pos + 1)) {
        const auto end = reply.find('}', pos);
        if (end == std::string::npos) break;
        try {
            const json j = json::parse(reply.substr(pos, end - pos + 1));
            if (j.contains("facts") && j["facts"].is_number_integer() && j["facts"].get<std::int64_t>() >= 0) {
                return j["facts"].get<std::int64_t>();
            }
        } catch (const json::exception&) {
        }
    }
    for (std::size_t i = 0; i < reply.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(reply[i])) != 0) {
            std::size_t j = i;
            while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j])) != 0) ++j;
            return std::stoll(reply.substr(i, j - i));
        }
    }
    throw BackendError("judge reply has no fact count", 1, false);
}

std::int64_t RemoteJudge::count_facts(const env::Trajectory& traj) {
    if (!traj.summary) return 0;
    json evidence = json::array();
    for (const auto& s : traj.steps) {
        if (!s.action || env::is_commit(*s.action)) continue;
        evidence.push_back(json{{"action", env::action_to_json(*s.action)}, {"result", env::to_json(s.result)}});
    }
    std::string user = "Tool results:\n" + evidence.dump() + "\n\nSummary:\n" + traj.summary->text;
    const json body{{"model", options_.model},
                    {"temperature", 0},
                    {"messages", json::array({json{{"role", "system"}, {"content", kJudgePrompt}},
                                              json{{"role", "user"}, {"content", user}}})}};
    std::map<std::string, std::string> headers;
    if (!options_.api_key.empty()) headers["Authorization"] = "Bearer " + options_.api_key;

    state_->in_flight.acquire();
    json reply;
    try {
        reply = detail::post_json(state_->target, "/chat/completions", body, headers, options_.timeout);
    } catch (...) {
        state_->in_flight.release();
        throw;
    }
    state_->in_flight.release();
    try {
        return parse_fact_count(reply.at("choices").at(0).at("message").at("content").get<std::string>());
    } catch (const json::exception& e) {
        throw BackendError(std::string("judge response missing fields: ") + e.what(), 1, false);
    }
}

}  // namespace uta::rewards
