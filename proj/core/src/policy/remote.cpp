#include "uta/policy/remote.hpp"

#include "http.hpp"
#include "uta/environment/trajectory.hpp"

#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <sstream>

namespace uta::policy {

using nlohmann::json;

namespace {

constexpr const char* kDefaultSystemPrompt =
    "You explore a relational database to answer a summarization task. Reply with exactly one JSON object "
    "{\"tool\": NAME, \"args\": {...}} per turn. Tools: sql {\"query\": a read-only SELECT}; schema {\"table\": "
    "name}; code {\"code\": script, \"tables\": [names]}; commit {\"summary\": final text}. Commit before the call "
    "budget runs out. Write summary facts one per line as table.column = value.";

std::string env_or(const std::string& value, const char* var) {
    if (!value.empty()) return value;
    const char* v = std::getenv(var);
    return v != nullptr ? std::string(v) : std::string();
}

}  // namespace

RemotePolicyOptions resolve_remote_options(RemotePolicyOptions o) {
    o.base_url = env_or(o.base_url, "UTA_BASE_URL");
    o.api_key = env_or(o.api_key, "UTA_API_KEY");
    if (o.base_url.empty()) throw ConfigError("remote backend needs a base URL (config or UTA_BASE_URL)");
    if (o.model.empty()) throw ConfigError("remote backend needs a model name");
    if (o.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (o.logprob_base != 0.0 && !(o.logprob_base > 1.0)) throw ConfigError("logprob_base must be e, 2 or 10");
    return o;
}

struct RemotePolicy::State {
    explicit State(int cap) : in_flight(cap) {}
    detail::HttpTarget target;
    std::counting_semaphore<1024> in_flight;
};

RemotePolicy::RemotePolicy(RemotePolicyOptions options)
    : options_(resolve_remote_options(std::move(options))),
      state_(std::make_unique<State>(std::min(options_.max_in_flight, 1024))) {
    state_->target = detail::parse_base_url(options_.base_url);
}

RemotePolicy::~RemotePolicy() = default;

json RemotePolicy::build_messages(const PromptContext& ctx) const {
    std::ostringstream user;
    user << "Task:\n" << ctx.task_text << "\n\nSchema:\n";
    for (const auto& t : ctx.schema) {
        user << "- " << t.name << " (" << t.row_count << " rows):";
        for (const auto& c : t.columns) user << " " << c.name << " " << c.type << ";";
        user << "\n";
    }
    if (!ctx.history.empty()) {
        user << "\nHistory:\n";
        for (std::size_t i = 0; i < ctx.history.size(); ++i) {
            const auto& h = ctx.history[i];
            user << i + 1 << ". " << (h.action ? serialize_action(*h.action) : h.raw_text) << "\n   -> "
                 << h.result_text << "\n";
        }
    }
    user << "\nRemaining tool calls: " << ctx.remaining_calls << "\n";
    return json::array({json{{"role", "system"},
                             {"content", options_.system_prompt.empty() ? kDefaultSystemPrompt : options_.system_prompt}},
                        json{{"role", "user"}, {"content", user.str()}}});
}

namespace {

double to_natural(double lp, double base) {
    const double v = base == 0.0 ? lp : lp * std::log(base);
    return std::min(v, 0.0);
}

}  // namespace

ActionProposal RemotePolicy::complete(const PromptContext& ctx, std::uint64_t seed) {
    std::map<std::string, std::string> headers;
    if (!options_.api_key.empty()) headers["Authorization"] = "Bearer " + options_.api_key;

    const json body{{"model", options_.model},
                    {"messages", build_messages(ctx)},
                    {"temperature", options_.temperature},
                    {"logprobs", true},
                    {"top_logprobs", options_.top_logprobs},
                    {"max_tokens", options_.max_tokens},
                    {"seed", seed}};

    auto call = [&](const std::string& path, const json& b) {
        state_->in_flight.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{state_->in_flight};
        return detail::with_retries(options_.max_attempts, options_.backoff,
                                    [&] { return detail::post_json(state_->target, path, b, headers, options_.timeout); });
    };

    const json reply = call("/chat/completions", body);
    ActionProposal p;
    p.sampling = {options_.temperature, seed};
    try {
        const json& choice = reply.at("choices").at(0);
        p.raw_text = choice.at("message").at("content").get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
            choice["logprobs"]["content"].is_array()) {
            for (const auto& t : choice["logprobs"]["content"]) {
                p.tokens.push_back(t.at("token").get<std::string>());
                p.logprobs.push_back(t.at("logprob").is_null() ? 0.0
                                                                : to_natural(t["logprob"].get<double>(), options_.logprob_base));
            }
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("chat response missing fields: ") + e.what(), 1, false);
    }

    // Throws ActionParseError for malformed output; the episode records it.
    p.action = parse_action(p.raw_text);

    std::string joined;
    for (const auto& t : p.tokens) joined += t;
    if (joined != p.raw_text && env::is_commit(p.action) && options_.echo_rescore) {
        // No usable offsets: score the message text itself.
        const json echo{{"model", options_.model}, {"prompt", p.raw_text}, {"echo", true},
                        {"logprobs", 1},           {"max_tokens", 0},      {"temperature", 0}};
        const json er = call("/completions", echo);
        try {
            const json& lp = er.at("choices").at(0).at("logprobs");
            p.tokens = lp.at("tokens").get<std::vector<std::string>>();
            p.logprobs.clear();
            for (const auto& v : lp.at("token_logprobs")) {
                p.logprobs.push_back(v.is_null() ? 0.0 : to_natural(v.get<double>(), options_.logprob_base));
            }
            p.token_offsets = lp.at("text_offset").get<std::vector<std::size_t>>();
        } catch (const json::exception& e) {
            throw BackendError(std::string("echo response missing fields: ") + e.what(), 1, false);
        }
    }
    return p;
}

namespace {

class RemoteSession : public PolicySession {
public:
    RemoteSession(RemotePolicy& policy, std::uint64_t seed) : policy_(policy), seed_(seed) {}
    ActionProposal propose(const PromptContext& ctx) override {
        return policy_.complete(ctx, seed_ + static_cast<std::uint64_t>(ctx.history.size()));
    }

private:
    RemotePolicy& policy_;
    std::uint64_t seed_;
};

}  // namespace

std::unique_ptr<PolicySession> RemotePolicy::start(const env::TaskSpec&, std::uint64_t seed, int) {
    return std::make_unique<RemoteSession>(*this, seed);
}

}  // namespace uta::policy
