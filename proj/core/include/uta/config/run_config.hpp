#pragma once

#include "uta/grpo/objective.hpp"
#include "uta/rewards/rewards.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::config {

struct DatabaseSection {
    std::string csv_dir;
    std::string descriptors;
    std::string patient_column = "patient_id";
    double split_ratio = 0.7;
};

struct TasksSection {
    std::string templates;
    std::string file;
    std::string slot_column = "cancer_type";
    int eval_percent = 20;
};

struct BackendSection {
    std::string kind = "mock";  // mock | remote
    std::string playbook;
    std::string base_url;
    std::string model;
    double temperature = 0.7;
    int top_logprobs = 1;
    int max_in_flight = 4;
    int max_attempts = 3;
    int timeout_ms = 60000;
    double logprob_base = 0.0;
};

struct JudgeSection {
    std::string kind = "mock";  // mock | remote
    std::string model;
    int max_retries = 3;
};

struct SimilaritySection {
    std::string kind = "token_f1";  // token_f1 | remote
    std::string url;
};

struct SandboxSection {
    std::vector<std::string> command;  // empty: no code tool
    std::int64_t time_limit_ms = 2000;
    std::int64_t output_cap_bytes = 65536;
};

struct EpisodeSection {
    int max_calls = 6;
    int row_limit = 50;
};

struct InferenceSection {
    int k = 5;
    double kappa = 0.5;
    int repeats = 5;
    std::vector<std::uint64_t> seeds;
};

struct TrainingSection {
    rewards::ScheduleKind schedule = rewards::ScheduleKind::zero;
    grpo::GrpoConfig grpo;
    bool adapt_running_mean = false;
    rewards::ConfidenceKind confidence = rewards::ConfidenceKind::perplexity;
    double vocab_size = 32000.0;
};

struct RunConfig {
    DatabaseSection database;
    TasksSection tasks;
    BackendSection backend;
    JudgeSection judge;
    SimilaritySection similarity;
    SandboxSection sandbox;
    EpisodeSection episode;
    InferenceSection inference;
    TrainingSection training;
    std::uint64_t seed = 1;
    int jobs = 1;

    void validate() const;  // ConfigError
};

/// Parses and validates. Unknown keys at any level raise ConfigError naming
/// the dotted path.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

}  // namespace uta::config
