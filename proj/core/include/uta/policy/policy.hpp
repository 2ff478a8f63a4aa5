#pragma once

#include "uta/environment/database.hpp"
#include "uta/environment/trajectory.hpp"
#include "uta/error.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uta::policy {

struct HistoryEntry {
    std::optional<env::Action> action;  // empty for an unparseable proposal
    std::string raw_text;               // set when action is empty
    bool ok = false;
    std::string result_text;            // tool result, truncated for the prompt
};

/// Everything the policy may condition on at one decision.
struct PromptContext {
    std::string task_id;
    std::string task_text;
    std::string schema_digest;
    std::span<const env::TableMeta> schema;
    std::vector<HistoryEntry> history;
    int remaining_calls = 0;
    int max_calls = 0;
};

struct Sampling {
    double temperature = 0.0;
    std::uint64_t seed = 0;
};

struct ActionProposal {
    env::Action action;
    std::string raw_text;
    std::vector<std::string> tokens;        // provider tokens covering raw_text
    std::vector<double> logprobs;           // natural log, one per token
    std::vector<std::size_t> token_offsets; // char offset of each token in raw_text; may be empty
    Sampling sampling;
};

enum class ParseErrorCode { no_object, multiple_objects, invalid_json, missing_field, unknown_tool, missing_arg, bad_arg };
const char* to_string(ParseErrorCode code) noexcept;

class ActionParseError : public DataError {
public:
    ActionParseError(ParseErrorCode code, const std::string& detail, std::string raw_text)
        : DataError(std::string("action parse error [") + to_string(code) + "]: " + detail),
          code_(code),
          raw_text_(std::move(raw_text)) {}
    ParseErrorCode code() const noexcept { return code_; }
    const std::string& raw_text() const noexcept { return raw_text_; }

private:
    ParseErrorCode code_;
    std::string raw_text_;
};

/// Thrown when a mock policy is asked for more steps than it has scripted.
class ScriptedUnderflow : public DataError {
public:
    explicit ScriptedUnderflow(const std::string& what) : DataError("scripted-underflow: " + what) {}
};

/// The summary argument could not be located or carries no tokens.
class SummarySpanError : public DataError {
public:
    explicit SummarySpanError(const std::string& what) : DataError("summary span: " + what) {}
};

/// Parses the single {"tool": ..., "args": {...}} object embedded in
/// raw_text; surrounding prose is ignored.
env::Action parse_action(std::string_view raw_text);

/// Canonical wire form. parse_action(serialize_action(a)) == a.
std::string serialize_action(const env::Action& action);

/// Byte range [begin, end) of the summary string's content (still JSON
/// escaped) inside raw_text.
struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};
std::optional<TextSpan> find_summary_span(std::string_view raw_text);

/// Restricts a commit proposal's tokens to those overlapping the summary
/// argument. Offsets come from token_offsets, or from concatenating tokens
/// when that reproduces raw_text exactly.
env::SummaryCandidate summary_logprobs(const ActionProposal& proposal);

/// Builds a proposal whose raw_text is the canonical wire form. For commit
/// actions the summary is split into whitespace-led word pieces, one token
/// each, with `summary_logprobs` attached in order; the JSON scaffolding
/// tokens get `scaffold_logprob`. Other actions become one token.
ActionProposal make_proposal(const env::Action& action, std::span<const double> summary_logprobs,
                             double scaffold_logprob = 0.0);

/// Whitespace-led word pieces of a summary ("a b" -> "a", " b").
std::vector<std::string> word_pieces(std::string_view text);

/// One episode's worth of decisions from a policy.
class PolicySession {
public:
    virtual ~PolicySession() = default;
    /// Throws ActionParseError for malformed model output (the episode
    /// records a failed step), ScriptedUnderflow, or BackendError.
    virtual ActionProposal propose(const PromptContext& ctx) = 0;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::unique_ptr<PolicySession> start(const env::TaskSpec& task, std::uint64_t seed, int rollout) = 0;
    virtual std::string name() const = 0;
};

}  // namespace uta::policy
