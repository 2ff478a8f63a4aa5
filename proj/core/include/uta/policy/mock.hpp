#pragma once

#include "uta/environment/database.hpp"
#include "uta/policy/policy.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace uta::policy {

/// One scripted model output, stored verbatim.
struct ScriptedStep {
    std::string raw_text;
    std::vector<std::string> tokens;
    std::vector<double> logprobs;
    std::vector<std::size_t> token_offsets;
};

ScriptedStep scripted_from_proposal(const ActionProposal& p);

struct ScriptedEpisode {
    std::string task_id;  // "*" matches any task
    bool non_terminating = false;
    std::vector<ScriptedStep> steps;
};

/// Scripted episodes grouped by task id. Every episode ends in a commit
/// unless marked non-terminating.
class Playbook {
public:
    void add(ScriptedEpisode episode);
    /// Episodes for the task, falling back to "*"; empty when neither exists.
    const std::vector<ScriptedEpisode>& episodes_for(const std::string& task_id) const;
    std::size_t size() const noexcept;

    /// One episode per line. A step is either {"tool", "args", "logprob"?,
    /// "summary_logprobs"?} or {"raw_text", "tokens", "logprobs",
    /// "token_offsets"?}.
    static Playbook load_jsonl(const std::filesystem::path& path);
    static Playbook from_jsonl(std::string_view text, const std::string& source = "<playbook>");
    /// Writes the verbatim form, in task order then insertion order.
    std::string to_jsonl() const;

private:
    std::map<std::string, std::vector<ScriptedEpisode>> episodes_;
};

/// Replays a playbook. Rollout k of a task uses episode k mod n. Steps pass
/// through parse_action, so malformed scripted text surfaces exactly as a
/// malformed model output would.
class MockPolicy : public Policy {
public:
    explicit MockPolicy(Playbook playbook) : playbook_(std::move(playbook)) {}
    std::unique_ptr<PolicySession> start(const env::TaskSpec& task, std::uint64_t seed, int rollout) override;
    std::string name() const override { return "mock"; }
    const Playbook& playbook() const noexcept { return playbook_; }

private:
    Playbook playbook_;
};

struct PlaybookSynthOptions {
    int episodes_per_task = 5;
    int max_calls = 6;
    std::uint64_t seed = 1;
};

/// Synthesizes a deterministic playbook over `db`. Each task gets a seeded
/// difficulty; harder tasks touch tables less consistently, hallucinate
/// more summary lines, carry lower summary logprobs, and sometimes never
/// commit. Summary lines use the "<table>.<column> = <value>" form the mock
/// judge understands.
Playbook synthesize_playbook(const env::DatabaseHandle& db, const std::vector<env::TaskSpec>& tasks,
                             const PlaybookSynthOptions& options = {});

}  // namespace uta::policy
