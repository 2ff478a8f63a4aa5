#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::env {

struct TaskSpec {
    std::string id;
    std::string template_id;
    std::string text;
    std::map<std::string, std::string> placeholders;
};

struct SqlQuery {
    std::string query;
    bool operator==(const SqlQuery&) const = default;
};

struct SchemaLookup {
    std::string table;
    bool operator==(const SchemaLookup&) const = default;
};

/// Script for the sandboxed code tool plus the tables exported to it.
struct CodeTool {
    std::string code;
    std::vector<std::string> tables;
    bool operator==(const CodeTool&) const = default;
};

/// Terminates the episode.
struct CommitSummary {
    std::string summary;
    bool operator==(const CommitSummary&) const = default;
};

using Action = std::variant<SqlQuery, SchemaLookup, CodeTool, CommitSummary>;

/// Wire name of the tool: "sql", "schema", "code" or "commit".
const char* tool_name(const Action& action) noexcept;
bool is_commit(const Action& action) noexcept;

struct ToolResult {
    bool ok = false;
    nlohmann::json payload;  // rows array, object, or text
    std::vector<std::string> columns;
    bool truncated = false;
    std::optional<std::string> error_text;
    std::set<std::string> tables_touched;
    std::chrono::microseconds elapsed{0};

    static ToolResult failure(std::string message);
};

struct SummaryCandidate {
    std::string text;
    std::vector<std::string> tokens;
    std::vector<double> logprobs;  // natural log
};

struct Step {
    std::string state_digest;
    std::optional<Action> action;          // empty when the proposal failed to parse
    std::optional<std::string> raw_text;   // kept only for unparseable proposals
    ToolResult result;
};

enum class Termination { commit, step_budget };

struct Trajectory {
    std::string task_id;
    std::string trajectory_id;
    std::uint64_t seed = 0;
    std::vector<Step> steps;
    std::optional<SummaryCandidate> summary;
    Termination terminated_by = Termination::step_budget;

    bool committed() const noexcept { return summary.has_value(); }

    /// Union of tables_touched over all steps.
    std::set<std::string> tables_touched() const;
};

struct SerializeOptions {
    bool include_timing = false;  // elapsed_us per step; off keeps logs replayable byte for byte
};

nlohmann::json action_to_json(const Action& action);
/// Inverse of action_to_json; throws DataError on malformed input.
Action action_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ToolResult& r, const SerializeOptions& opts = {});
ToolResult tool_result_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SummaryCandidate& s);
SummaryCandidate summary_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trajectory& t, const SerializeOptions& opts = {});
Trajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TaskSpec& t);
TaskSpec task_from_json(const nlohmann::json& j);

}  // namespace uta::env
