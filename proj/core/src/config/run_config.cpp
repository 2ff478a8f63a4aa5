#include "uta/config/run_config.hpp"

#include "uta/error.hpp"

#include <fstream>
#include <set>

namespace uta::config {

using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    std::optional<Reader> section(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Reader(j_.at(key), path_.empty() ? key : path_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, _] : j_.items()) {
            if (seen_.count(k) == 0) throw ConfigError("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
        }
    }

private:
    std::string where(const char* key = nullptr) const {
        std::string p = path_;
        if (key != nullptr) p = p.empty() ? key : p + "." + key;
        return "config '" + (p.empty() ? std::string("<root>") : p) + "'";
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
    if (!(database.split_ratio > 0.0 && database.split_ratio < 1.0)) throw ConfigError("database.split_ratio must lie in (0, 1)");
    if (tasks.eval_percent < 0 || tasks.eval_percent > 100) throw ConfigError("tasks.eval_percent must lie in [0, 100]");
    if (backend.kind != "mock" && backend.kind != "remote") throw ConfigError("backend.kind must be mock or remote");
    if (judge.kind != "mock" && judge.kind != "remote") throw ConfigError("judge.kind must be mock or remote");
    if (similarity.kind != "token_f1" && similarity.kind != "remote") {
        throw ConfigError("similarity.kind must be token_f1 or remote");
    }
    if (similarity.kind == "remote" && similarity.url.empty()) throw ConfigError("similarity.url is required for remote");
    if (judge.max_retries < 0) throw ConfigError("judge.max_retries must be >= 0");
    if (sandbox.time_limit_ms <= 0 || sandbox.output_cap_bytes <= 0) throw ConfigError("sandbox limits must be positive");
    if (episode.max_calls < 1) throw ConfigError("episode.max_calls must be >= 1");
    if (episode.row_limit < 1) throw ConfigError("episode.row_limit must be >= 1");
    if (inference.k < 2) throw ConfigError("inference.k must be >= 2");
    if (!(inference.kappa >= 0.0)) throw ConfigError("inference.kappa must be >= 0");
    if (inference.repeats < 1) throw ConfigError("inference.repeats must be >= 1");
    if (!inference.seeds.empty() && inference.seeds.size() != static_cast<std::size_t>(inference.k)) {
        throw ConfigError("inference.seeds must list exactly k values");
    }
    if (!(training.vocab_size > 1.0)) throw ConfigError("training.vocab_size must be > 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    training.grpo.validate();
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    Reader root(j, "");
    if (auto s = root.section("database")) {
        s->get("csv_dir", c.database.csv_dir);
        s->get("descriptors", c.database.descriptors);
        s->get("patient_column", c.database.patient_column);
        s->get("split_ratio", c.database.split_ratio);
        s->finish();
    }
    if (auto s = root.section("tasks")) {
        s->get("templates", c.tasks.templates);
        s->get("file", c.tasks.file);
        s->get("slot_column", c.tasks.slot_column);
        s->get("eval_percent", c.tasks.eval_percent);
        s->finish();
    }
    if (auto s = root.section("backend")) {
        s->get("kind", c.backend.kind);
        s->get("playbook", c.backend.playbook);
        s->get("base_url", c.backend.base_url);
        s->get("model", c.backend.model);
        s->get("temperature", c.backend.temperature);
        s->get("top_logprobs", c.backend.top_logprobs);
        s->get("max_in_flight", c.backend.max_in_flight);
        s->get("max_attempts", c.backend.max_attempts);
        s->get("timeout_ms", c.backend.timeout_ms);
        s->get("logprob_base", c.backend.logprob_base);
        s->finish();
    }
    if (auto s = root.section("judge")) {
        s->get("kind", c.judge.kind);
        s->get("model", c.judge.model);
        s->get("max_retries", c.judge.max_retries);
        s->finish();
    }
    if (auto s = root.section("similarity")) {
        s->get("kind", c.similarity.kind);
        s->get("url", c.similarity.url);
        s->finish();
    }
    if (auto s = root.section("sandbox")) {
        s->get("command", c.sandbox.command);
        s->get("time_limit_ms", c.sandbox.time_limit_ms);
        s->get("output_cap_bytes", c.sandbox.output_cap_bytes);
        s->finish();
    }
    if (auto s = root.section("episode")) {
        s->get("max_calls", c.episode.max_calls);
        s->get("row_limit", c.episode.row_limit);
        s->finish();
    }
    if (auto s = root.section("inference")) {
        s->get("k", c.inference.k);
        s->get("kappa", c.inference.kappa);
        s->get("repeats", c.inference.repeats);
        s->get("seeds", c.inference.seeds);
        s->finish();
    }
    if (auto s = root.section("training")) {
        std::string schedule = rewards::to_string(c.training.schedule);
        std::string confidence = rewards::to_string(c.training.confidence);
        s->get("schedule", schedule);
        s->get("confidence", confidence);
        c.training.schedule = rewards::parse_schedule(schedule);
        c.training.confidence = rewards::parse_confidence(confidence);
        s->get("epsilon", c.training.grpo.epsilon);
        s->get("beta", c.training.grpo.beta);
        s->get("learning_rate", c.training.grpo.learning_rate);
        s->get("steps", c.training.grpo.steps);
        s->get("groups", c.training.grpo.groups);
        s->get("rollouts", c.training.grpo.rollouts);
        s->get("epochs", c.training.grpo.epochs);
        s->get("adapt_running_mean", c.training.adapt_running_mean);
        s->get("vocab_size", c.training.vocab_size);
        s->finish();
    }
    root.get("seed", c.seed);
    root.get("jobs", c.jobs);
    root.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const RunConfig& c) {
    return json{
        {"database",
         {{"csv_dir", c.database.csv_dir},
          {"descriptors", c.database.descriptors},
          {"patient_column", c.database.patient_column},
          {"split_ratio", c.database.split_ratio}}},
        {"tasks",
         {{"templates", c.tasks.templates},
          {"file", c.tasks.file},
          {"slot_column", c.tasks.slot_column},
          {"eval_percent", c.tasks.eval_percent}}},
        {"backend",
         {{"kind", c.backend.kind},
          {"playbook", c.backend.playbook},
          {"base_url", c.backend.base_url},
          {"model", c.backend.model},
          {"temperature", c.backend.temperature},
          {"top_logprobs", c.backend.top_logprobs},
          {"max_in_flight", c.backend.max_in_flight},
          {"max_attempts", c.backend.max_attempts},
          {"timeout_ms", c.backend.timeout_ms},
          {"logprob_base", c.backend.logprob_base}}},
        {"judge", {{"kind", c.judge.kind}, {"model", c.judge.model}, {"max_retries", c.judge.max_retries}}},
        {"similarity", {{"kind", c.similarity.kind}, {"url", c.similarity.url}}},
        {"sandbox",
         {{"command", c.sandbox.command},
          {"time_limit_ms", c.sandbox.time_limit_ms},
          {"output_cap_bytes", c.sandbox.output_cap_bytes}}},
        {"episode", {{"max_calls", c.episode.max_calls}, {"row_limit", c.episode.row_limit}}},
        {"inference",
         {{"k", c.inference.k}, {"kappa", c.inference.kappa}, {"repeats", c.inference.repeats}, {"seeds", c.inference.seeds}}},
        {"training",
         {{"schedule", rewards::to_string(c.training.schedule)},
          {"confidence", rewards::to_string(c.training.confidence)},
          {"epsilon", c.training.grpo.epsilon},
          {"beta", c.training.grpo.beta},
          {"learning_rate", c.training.grpo.learning_rate},
          {"steps", c.training.grpo.steps},
          {"groups", c.training.grpo.groups},
          {"rollouts", c.training.grpo.rollouts},
          {"epochs", c.training.grpo.epochs},
          {"adapt_running_mean", c.training.adapt_running_mean},
          {"vocab_size", c.training.vocab_size}}},
        {"seed", c.seed},
        {"jobs", c.jobs}};
}

}  // namespace uta::config
