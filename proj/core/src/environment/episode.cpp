#include "uta/environment/episode.hpp"

#include "uta/rng.hpp"

namespace uta::env {

using nlohmann::json;

std::string render_result(const ToolResult& result, std::size_t max_chars) {
    std::string text;
    if (!result.ok) {
        text = "error: " + result.error_text.value_or("");
    } else if (result.payload.is_string()) {
        text = result.payload.get<std::string>();
    } else {
        text = result.payload.dump();
        if (result.truncated) {
            text += " (truncated)";
        }
    }
    if (text.size() > max_chars) {
        text.resize(max_chars);
        text += "...";
    }
    return text;
}

namespace {

std::string state_digest(const TaskSpec& task, const std::string& schema_digest,
                         const std::vector<policy::HistoryEntry>& history) {
    json h = json::array();
    for (const auto& e : history) {
        h.push_back(json{{"action", e.action ? action_to_json(*e.action) : json(nullptr)},
                         {"raw", e.raw_text},
                         {"ok", e.ok},
                         {"result", e.result_text}});
    }
    const json state{{"task", task.id}, {"text", task.text}, {"schema", schema_digest}, {"history", h}};
    return fnv1a_hex(state.dump());
}

}  // namespace

Trajectory run_episode(const TaskSpec& task, const Environment& environment, policy::Policy& policy,
                       const EpisodeOptions& options) {
    if (options.max_calls < 1) {
        throw ConfigError("max_calls must be at least 1");
    }
    Trajectory traj;
    traj.task_id = task.id;
    traj.trajectory_id =
        options.trajectory_id.empty() ? task.id + "/" + std::to_string(options.rollout) : options.trajectory_id;
    traj.seed = options.seed;
    traj.terminated_by = Termination::step_budget;

    auto session = policy.start(task, options.seed, options.rollout);
    const auto& schema = environment.database().tables();

    policy::PromptContext ctx;
    ctx.task_id = task.id;
    ctx.task_text = task.text;
    ctx.schema_digest = environment.schema_digest();
    ctx.schema = std::span<const TableMeta>(schema.data(), schema.size());
    ctx.max_calls = options.max_calls;

    for (int t = 0; t < options.max_calls; ++t) {
        ctx.remaining_calls = options.max_calls - t;
        Step step;
        step.state_digest = state_digest(task, ctx.schema_digest, ctx.history);

        policy::ActionProposal proposal;
        try {
            proposal = session->propose(ctx);
        } catch (const policy::ActionParseError& e) {
            step.raw_text = e.raw_text();
            step.result = ToolResult::failure(e.what());
            ctx.history.push_back({std::nullopt, e.raw_text(), false, render_result(step.result, options.history_result_chars)});
            traj.steps.push_back(std::move(step));
            continue;
        }
        step.action = proposal.action;

        if (is_commit(proposal.action)) {
            try {
                traj.summary = policy::summary_logprobs(proposal);
                step.result.ok = true;
                step.result.payload = nullptr;
            } catch (const policy::SummarySpanError& e) {
                step.raw_text = proposal.raw_text;
                step.result = ToolResult::failure(e.what());
            }
            traj.terminated_by = Termination::commit;
            traj.steps.push_back(std::move(step));
            break;
        }

        step.result = environment.execute(proposal.action, traj.trajectory_id + "#" + std::to_string(t));
        ctx.history.push_back({proposal.action, {}, step.result.ok, render_result(step.result, options.history_result_chars)});
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

}  // namespace uta::env
