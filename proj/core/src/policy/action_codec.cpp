#include "uta/policy/policy.hpp"

#include <cctype>

namespace uta::policy {

using nlohmann::json;

const char* to_string(ParseErrorCode code) noexcept {
    switch (code) {
        case ParseErrorCode::no_object: return "no_object";
        case ParseErrorCode::multiple_objects: return "multiple_objects";
        case ParseErrorCode::invalid_json: return "invalid_json";
        case ParseErrorCode::missing_field: return "missing_field";
        case ParseErrorCode::unknown_tool: return "unknown_tool";
        case ParseErrorCode::missing_arg: return "missing_arg";
        case ParseErrorCode::bad_arg: return "bad_arg";
    }
    return "invalid_json";
}

namespace {

struct Segment {
    std::size_t begin;
    std::size_t end;  // one past the closing brace
};

/// Balanced top-level {...} segments, string-aware inside each segment.
std::vector<Segment> brace_segments(std::string_view s) {
    std::vector<Segment> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '{') {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        int depth = 0;
        bool in_string = false;
        bool closed = false;
        for (; i < s.size(); ++i) {
            const char c = s[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    ++i;
                    closed = true;
                    break;
                }
            }
        }
        if (closed) {
            out.push_back({begin, i});
        }
    }
    return out;
}

/// End offset (one past the closing quote) of the JSON string starting at `i`.
std::size_t skip_string(std::string_view s, std::size_t i) {
    ++i;
    while (i < s.size()) {
        if (s[i] == '\\') {
            i += 2;
            continue;
        }
        if (s[i] == '"') {
            return i + 1;
        }
        ++i;
    }
    return s.size();
}

std::size_t skip_ws(std::string_view s, std::size_t i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])) != 0) ++i;
    return i;
}

std::string json_escape_body(std::string_view text) {
    const std::string quoted = json(std::string(text)).dump();
    return quoted.substr(1, quoted.size() - 2);
}

}  // namespace

env::Action parse_action(std::string_view raw_text) {
    const std::string raw(raw_text);
    std::vector<json> objects;
    bool saw_invalid = false;
    for (const auto& seg : brace_segments(raw_text)) {
        try {
            json j = json::parse(raw_text.substr(seg.begin, seg.end - seg.begin));
            if (j.is_object()) {
                objects.push_back(std::move(j));
            }
        } catch (const json::exception&) {
            saw_invalid = true;
        }
    }
    if (objects.empty()) {
        if (saw_invalid) {
            throw ActionParseError(ParseErrorCode::invalid_json, "embedded object is not valid JSON", raw);
        }
        throw ActionParseError(ParseErrorCode::no_object, "no JSON object found", raw);
    }
    if (objects.size() > 1) {
        throw ActionParseError(ParseErrorCode::multiple_objects,
                               std::to_string(objects.size()) + " JSON objects found, expected exactly one", raw);
    }
    const json& obj = objects.front();
    if (!obj.contains("tool") || !obj["tool"].is_string()) {
        throw ActionParseError(ParseErrorCode::missing_field, "'tool' must be a string", raw);
    }
    if (!obj.contains("args") || !obj["args"].is_object()) {
        throw ActionParseError(ParseErrorCode::missing_field, "'args' must be an object", raw);
    }
    const std::string tool = obj["tool"].get<std::string>();
    const json& args = obj["args"];

    auto string_arg = [&](const char* key) {
        if (!args.contains(key)) {
            throw ActionParseError(ParseErrorCode::missing_arg, std::string("missing argument '") + key + "'", raw);
        }
        if (!args[key].is_string()) {
            throw ActionParseError(ParseErrorCode::bad_arg, std::string("argument '") + key + "' must be a string", raw);
        }
        return args[key].get<std::string>();
    };

    if (tool == "sql") {
        return env::SqlQuery{string_arg("query")};
    }
    if (tool == "schema") {
        return env::SchemaLookup{string_arg("table")};
    }
    if (tool == "code") {
        env::CodeTool code{string_arg("code"), {}};
        if (args.contains("tables")) {
            if (!args["tables"].is_array()) {
                throw ActionParseError(ParseErrorCode::bad_arg, "argument 'tables' must be an array", raw);
            }
            for (const auto& t : args["tables"]) {
                if (!t.is_string()) {
                    throw ActionParseError(ParseErrorCode::bad_arg, "argument 'tables' must hold strings", raw);
                }
                code.tables.push_back(t.get<std::string>());
            }
        }
        return code;
    }
    if (tool == "commit") {
        return env::CommitSummary{string_arg("summary")};
    }
    throw ActionParseError(ParseErrorCode::unknown_tool, "unknown tool '" + tool + "'", raw);
}

std::string serialize_action(const env::Action& action) {
    if (const auto* c = std::get_if<env::CommitSummary>(&action)) {
        return R"({"tool":"commit","args":{"summary":")" + json_escape_body(c->summary) + "\"}}";
    }
    return env::action_to_json(action).dump();
}

std::optional<TextSpan> find_summary_span(std::string_view raw) {
    const auto segments = brace_segments(raw);
    for (const auto& seg : segments) {
        std::size_t i = seg.begin;
        while (i < seg.end) {
            if (raw[i] != '"') {
                ++i;
                continue;
            }
            const std::size_t key_end = skip_string(raw, i);
            const std::string_view key = raw.substr(i + 1, key_end - i - 2);
            std::size_t j = skip_ws(raw, key_end);
            if (key == "summary" && j < seg.end && raw[j] == ':') {
                j = skip_ws(raw, j + 1);
                if (j < seg.end && raw[j] == '"') {
                    const std::size_t value_end = skip_string(raw, j);
                    return TextSpan{j + 1, value_end - 1};
                }
            }
            i = key_end;
        }
    }
    return std::nullopt;
}

env::SummaryCandidate summary_logprobs(const ActionProposal& proposal) {
    const auto* commit = std::get_if<env::CommitSummary>(&proposal.action);
    if (commit == nullptr) {
        throw SummarySpanError("proposal is not a commit");
    }
    if (proposal.tokens.size() != proposal.logprobs.size()) {
        throw SummarySpanError("tokens and logprobs differ in length");
    }

    std::vector<std::size_t> offsets = proposal.token_offsets;
    if (offsets.empty()) {
        std::string joined;
        for (const auto& t : proposal.tokens) {
            offsets.push_back(joined.size());
            joined += t;
        }
        if (joined != proposal.raw_text) {
            throw SummarySpanError("no token offsets and tokens do not reproduce the raw text");
        }
    }
    if (offsets.size() != proposal.tokens.size()) {
        throw SummarySpanError("token_offsets and tokens differ in length");
    }

    const auto span = find_summary_span(proposal.raw_text);
    if (!span) {
        throw SummarySpanError("summary argument not found in raw text");
    }

    env::SummaryCandidate out;
    out.text = commit->summary;
    for (std::size_t k = 0; k < proposal.tokens.size(); ++k) {
        const std::size_t b = offsets[k];
        const std::size_t e = b + proposal.tokens[k].size();
        if (b < span->end && e > span->begin) {
            out.tokens.push_back(proposal.tokens[k]);
            out.logprobs.push_back(proposal.logprobs[k]);
        }
    }
    if (out.tokens.empty()) {
        throw SummarySpanError("summary has zero tokens; perplexity undefined");
    }
    return out;
}

std::vector<std::string> word_pieces(std::string_view text) {
    std::vector<std::string> pieces;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) != 0) ++i;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) == 0) ++i;
        pieces.emplace_back(text.substr(start, i - start));
    }
    // Trailing whitespace belongs to the last word.
    if (pieces.size() > 1 && pieces.back().find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
        const std::string tail = pieces.back();
        pieces.pop_back();
        pieces.back() += tail;
    }
    return pieces;
}

ActionProposal make_proposal(const env::Action& action, std::span<const double> summary_lps, double scaffold_logprob) {
    ActionProposal p;
    p.action = action;
    p.raw_text = serialize_action(action);
    const auto* commit = std::get_if<env::CommitSummary>(&action);
    if (commit == nullptr) {
        p.tokens = {p.raw_text};
        p.logprobs = {scaffold_logprob};
        p.token_offsets = {0};
        return p;
    }

    const auto pieces = word_pieces(commit->summary);
    if (pieces.size() != summary_lps.size()) {
        throw DataError("scripted commit has " + std::to_string(pieces.size()) + " summary tokens but " +
                        std::to_string(summary_lps.size()) + " logprobs");
    }
    const std::string prefix = R"({"tool":"commit","args":{"summary":")";
    p.tokens.push_back(prefix);
    p.logprobs.push_back(scaffold_logprob);
    p.token_offsets.push_back(0);
    std::size_t offset = prefix.size();
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        std::string tok = json_escape_body(pieces[k]);
        p.token_offsets.push_back(offset);
        offset += tok.size();
        p.tokens.push_back(std::move(tok));
        p.logprobs.push_back(summary_lps[k]);
    }
    p.tokens.emplace_back("\"}}");
    p.logprobs.push_back(scaffold_logprob);
    p.token_offsets.push_back(offset);
    return p;
}

}  // namespace uta::policy
