#pragma once

#include "uta/environment/tools.hpp"
#include "uta/environment/trajectory.hpp"
#include "uta/policy/policy.hpp"

#include <cstdint>
#include <string>

namespace uta::env {

struct EpisodeOptions {
    int max_calls = 6;
    std::uint64_t seed = 0;
    int rollout = 0;
    std::string trajectory_id;        // defaults to "<task_id>/<rollout>"
    std::size_t history_result_chars = 2000;
};

/// One task-conditioned episode: propose, execute, append, until a commit
/// or the budget runs out.
///
/// Unparseable proposals become failed steps with no action. A commit whose
/// summary span cannot be extracted ends the episode without a summary.
Trajectory run_episode(const TaskSpec& task, const Environment& environment, policy::Policy& policy,
                       const EpisodeOptions& options = {});

/// Text shown to the policy for a tool result, cut to max_chars.
std::string render_result(const ToolResult& result, std::size_t max_chars);

}  // namespace uta::env
