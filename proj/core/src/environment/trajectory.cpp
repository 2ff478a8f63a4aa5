#include "uta/environment/trajectory.hpp"

#include "uta/error.hpp"

namespace uta::env {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw DataError(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

std::string require_string(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_string()) {
        throw DataError(std::string("field '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

}  // namespace

const char* tool_name(const Action& action) noexcept {
    switch (action.index()) {
        case 0: return "sql";
        case 1: return "schema";
        case 2: return "code";
        default: return "commit";
    }
}

bool is_commit(const Action& action) noexcept { return std::holds_alternative<CommitSummary>(action); }

ToolResult ToolResult::failure(std::string message) {
    ToolResult r;
    r.ok = false;
    r.payload = nullptr;
    r.error_text = std::move(message);
    return r;
}

std::set<std::string> Trajectory::tables_touched() const {
    std::set<std::string> out;
    for (const auto& s : steps) {
        out.insert(s.result.tables_touched.begin(), s.result.tables_touched.end());
    }
    return out;
}

json action_to_json(const Action& action) {
    json args = std::visit(overloaded{
                               [](const SqlQuery& a) { return json{{"query", a.query}}; },
                               [](const SchemaLookup& a) { return json{{"table", a.table}}; },
                               [](const CodeTool& a) { return json{{"code", a.code}, {"tables", a.tables}}; },
                               [](const CommitSummary& a) { return json{{"summary", a.summary}}; },
                           },
                           action);
    return json{{"tool", tool_name(action)}, {"args", std::move(args)}};
}

Action action_from_json(const json& j) {
    const std::string tool = require_string(j, "tool");
    const json& args = require(j, "args");
    if (!args.is_object()) {
        throw DataError("'args' must be an object");
    }
    if (tool == "sql") {
        return SqlQuery{require_string(args, "query")};
    }
    if (tool == "schema") {
        return SchemaLookup{require_string(args, "table")};
    }
    if (tool == "code") {
        CodeTool c{require_string(args, "code"), {}};
        if (args.contains("tables")) {
            if (!args["tables"].is_array()) {
                throw DataError("'tables' must be an array of strings");
            }
            for (const auto& t : args["tables"]) {
                if (!t.is_string()) {
                    throw DataError("'tables' must be an array of strings");
                }
                c.tables.push_back(t.get<std::string>());
            }
        }
        return c;
    }
    if (tool == "commit") {
        return CommitSummary{require_string(args, "summary")};
    }
    throw DataError("unknown tool '" + tool + "'");
}

json to_json(const ToolResult& r, const SerializeOptions& opts) {
    json j{
        {"ok", r.ok},
        {"payload", r.payload},
        {"error", r.error_text ? json(*r.error_text) : json(nullptr)},
        {"tables_touched", r.tables_touched},
    };
    if (!r.columns.empty()) {
        j["columns"] = r.columns;
    }
    if (r.truncated) {
        j["truncated"] = true;
    }
    if (opts.include_timing) {
        j["elapsed_us"] = r.elapsed.count();
    }
    return j;
}

ToolResult tool_result_from_json(const json& j) {
    ToolResult r;
    r.ok = require(j, "ok").get<bool>();
    r.payload = j.value("payload", json(nullptr));
    if (j.contains("error") && j["error"].is_string()) {
        r.error_text = j["error"].get<std::string>();
    }
    for (const auto& t : j.value("tables_touched", json::array())) {
        r.tables_touched.insert(t.get<std::string>());
    }
    if (j.contains("columns")) {
        r.columns = j["columns"].get<std::vector<std::string>>();
    }
    r.truncated = j.value("truncated", false);
    r.elapsed = std::chrono::microseconds(j.value("elapsed_us", std::int64_t{0}));
    return r;
}

json to_json(const SummaryCandidate& s) {
    return json{{"text", s.text}, {"tokens", s.tokens}, {"logprobs", s.logprobs}};
}

SummaryCandidate summary_from_json(const json& j) {
    SummaryCandidate s;
    s.text = require_string(j, "text");
    s.tokens = require(j, "tokens").get<std::vector<std::string>>();
    s.logprobs = require(j, "logprobs").get<std::vector<double>>();
    if (s.tokens.size() != s.logprobs.size()) {
        throw DataError("summary tokens and logprobs differ in length");
    }
    return s;
}

json to_json(const Trajectory& t, const SerializeOptions& opts) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        json step{
            {"state", s.state_digest},
            {"action", s.action ? action_to_json(*s.action) : json(nullptr)},
            {"result", to_json(s.result, opts)},
        };
        if (s.raw_text) {
            step["raw_text"] = *s.raw_text;
        }
        steps.push_back(std::move(step));
    }
    return json{
        {"task_id", t.task_id},
        {"trajectory_id", t.trajectory_id},
        {"seed", t.seed},
        {"steps", std::move(steps)},
        {"summary", t.summary ? to_json(*t.summary) : json(nullptr)},
        {"terminated_by", t.terminated_by == Termination::commit ? "commit" : "step_budget"},
    };
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.task_id = require_string(j, "task_id");
    t.trajectory_id = j.value("trajectory_id", std::string{});
    t.seed = j.value("seed", std::uint64_t{0});
    for (const auto& sj : require(j, "steps")) {
        Step s;
        s.state_digest = sj.value("state", std::string{});
        if (sj.contains("action") && !sj["action"].is_null()) {
            s.action = action_from_json(sj["action"]);
        }
        if (sj.contains("raw_text")) {
            s.raw_text = sj["raw_text"].get<std::string>();
        }
        s.result = tool_result_from_json(require(sj, "result"));
        t.steps.push_back(std::move(s));
    }
    if (j.contains("summary") && !j["summary"].is_null()) {
        t.summary = summary_from_json(j["summary"]);
    }
    const std::string term = require_string(j, "terminated_by");
    if (term == "commit") {
        t.terminated_by = Termination::commit;
    } else if (term == "step_budget") {
        t.terminated_by = Termination::step_budget;
    } else {
        throw DataError("unknown terminated_by '" + term + "'");
    }
    return t;
}

json to_json(const TaskSpec& t) {
    return json{{"id", t.id}, {"template_id", t.template_id}, {"text", t.text}, {"placeholders", t.placeholders}};
}

TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    t.id = require_string(j, "id");
    t.text = require_string(j, "text");
    t.template_id = j.value("template_id", std::string{});
    if (j.contains("placeholders")) {
        t.placeholders = j["placeholders"].get<std::map<std::string, std::string>>();
    }
    if (t.text.empty()) {
        throw DataError("task " + t.id + " has empty text");
    }
    return t;
}

}  // namespace uta::env
