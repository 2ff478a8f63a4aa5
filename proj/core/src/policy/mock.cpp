#include "uta/policy/mock.hpp"

#include "uta/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace uta::policy {

using nlohmann::json;

ScriptedStep scripted_from_proposal(const ActionProposal& p) {
    return ScriptedStep{p.raw_text, p.tokens, p.logprobs, p.token_offsets};
}

void Playbook::add(ScriptedEpisode episode) {
    if (episode.task_id.empty()) {
        throw DataError("scripted episode without task_id");
    }
    if (!episode.non_terminating) {
        bool ends_in_commit = false;
        if (!episode.steps.empty()) {
            try {
                ends_in_commit = env::is_commit(parse_action(episode.steps.back().raw_text));
            } catch (const ActionParseError&) {
                ends_in_commit = false;
            }
        }
        if (!ends_in_commit) {
            throw DataError("scripted episode for '" + episode.task_id +
                            "' must end with a commit or be marked non_terminating");
        }
    }
    for (const auto& s : episode.steps) {
        if (s.tokens.size() != s.logprobs.size()) {
            throw DataError("scripted step: tokens and logprobs differ in length");
        }
        for (const double lp : s.logprobs) {
            if (!(lp <= 0.0)) throw DataError("scripted step: logprob must be <= 0");
        }
    }
    episodes_[episode.task_id].push_back(std::move(episode));
}

const std::vector<ScriptedEpisode>& Playbook::episodes_for(const std::string& task_id) const {
    static const std::vector<ScriptedEpisode> none;
    if (auto it = episodes_.find(task_id); it != episodes_.end()) return it->second;
    if (auto it = episodes_.find("*"); it != episodes_.end()) return it->second;
    return none;
}

std::size_t Playbook::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, eps] : episodes_) n += eps.size();
    return n;
}

namespace {

ScriptedStep step_from_json(const json& s) {
    if (s.contains("raw_text")) {
        ScriptedStep step;
        step.raw_text = s.at("raw_text").get<std::string>();
        step.tokens = s.value("tokens", std::vector<std::string>{step.raw_text});
        step.logprobs = s.value("logprobs", std::vector<double>(step.tokens.size(), 0.0));
        step.token_offsets = s.value("token_offsets", std::vector<std::size_t>{});
        return step;
    }
    const env::Action action = env::action_from_json(s);
    const auto summary_lps = s.value("summary_logprobs", std::vector<double>{});
    std::vector<double> lps = summary_lps;
    if (const auto* c = std::get_if<env::CommitSummary>(&action); c != nullptr && summary_lps.empty()) {
        lps.assign(word_pieces(c->summary).size(), 0.0);
    }
    return scripted_from_proposal(make_proposal(action, lps, s.value("logprob", 0.0)));
}

}  // namespace

Playbook Playbook::from_jsonl(std::string_view text, const std::string& source) {
    Playbook pb;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        try {
            const json j = json::parse(line);
            ScriptedEpisode ep;
            ep.task_id = j.at("task_id").get<std::string>();
            ep.non_terminating = j.value("non_terminating", false);
            for (const auto& s : j.at("steps")) {
                ep.steps.push_back(step_from_json(s));
            }
            pb.add(std::move(ep));
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return pb;
}

Playbook Playbook::load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open playbook " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_jsonl(ss.str(), path.string());
}

std::string Playbook::to_jsonl() const {
    std::string out;
    for (const auto& [task, eps] : episodes_) {
        for (const auto& ep : eps) {
            json steps = json::array();
            for (const auto& s : ep.steps) {
                steps.push_back(json{{"raw_text", s.raw_text},
                                     {"tokens", s.tokens},
                                     {"logprobs", s.logprobs},
                                     {"token_offsets", s.token_offsets}});
            }
            out += json{{"task_id", task}, {"non_terminating", ep.non_terminating}, {"steps", steps}}.dump();
            out += "\n";
        }
    }
    return out;
}

namespace {

class MockSession : public PolicySession {
public:
    MockSession(const ScriptedEpisode& ep, std::uint64_t seed) : ep_(ep), seed_(seed) {}

    ActionProposal propose(const PromptContext& ctx) override {
        if (cursor_ >= ep_.steps.size()) {
            throw ScriptedUnderflow("playbook for '" + ctx.task_id + "' exhausted after " +
                                    std::to_string(ep_.steps.size()) + " steps");
        }
        const ScriptedStep& s = ep_.steps[cursor_++];
        ActionProposal p;
        p.action = parse_action(s.raw_text);
        p.raw_text = s.raw_text;
        p.tokens = s.tokens;
        p.logprobs = s.logprobs;
        p.token_offsets = s.token_offsets;
        p.sampling = {0.0, seed_};
        return p;
    }

private:
    const ScriptedEpisode& ep_;
    std::uint64_t seed_;
    std::size_t cursor_ = 0;
};

}  // namespace

std::unique_ptr<PolicySession> MockPolicy::start(const env::TaskSpec& task, std::uint64_t seed, int rollout) {
    const auto& eps = playbook_.episodes_for(task.id);
    if (eps.empty()) {
        throw ScriptedUnderflow("no scripted episode for task '" + task.id + "'");
    }
    const auto idx = static_cast<std::size_t>(rollout < 0 ? 0 : rollout) % eps.size();
    return std::make_unique<MockSession>(eps[idx], seed);
}

namespace {

struct Fact {
    std::string table;
    std::string line;
};

std::string fmt_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// A grounded "table.column = value" line drawn from a random non-null cell.
std::optional<Fact> sample_fact(const env::DatabaseHandle& db, const env::TableMeta& t, Rng& rng) {
    const auto rows = db.read_rows(t.name);
    if (rows.empty() || t.columns.empty()) return std::nullopt;
    for (int attempt = 0; attempt < 8; ++attempt) {
        const auto& row = rows[rng.uniform_index(rows.size())];
        const auto c = rng.uniform_index(t.columns.size());
        if (std::holds_alternative<std::monostate>(row[c])) continue;
        return Fact{t.name, t.name + "." + t.columns[c].name + " = " + env::cell_to_string(row[c])};
    }
    return std::nullopt;
}

Fact hallucinated_fact(const env::TableMeta& t, Rng& rng) {
    const auto& col = t.columns[rng.uniform_index(t.columns.size())];
    return Fact{t.name, t.name + "." + col.name + " = " + fmt_number(90000.0 + 1000.0 * rng.uniform01())};
}

}  // namespace

Playbook synthesize_playbook(const env::DatabaseHandle& db, const std::vector<env::TaskSpec>& tasks,
                             const PlaybookSynthOptions& o) {
    if (o.max_calls < 2) throw ConfigError("playbook synthesis needs max_calls >= 2");
    std::vector<const env::TableMeta*> tables;
    for (const auto& t : db.tables()) {
        if (t.row_count > 0 && !t.columns.empty()) tables.push_back(&t);
    }
    if (tables.empty()) throw DataError("playbook synthesis needs a database with non-empty tables");

    Playbook pb;
    for (const auto& task : tasks) {
        Rng task_rng(mix_seed({o.seed, fnv1a64(task.id)}));
        const double difficulty = task_rng.uniform01();

        // Tables this task is really about, and the grounded facts it supports.
        std::vector<const env::TableMeta*> shuffled = tables;
        task_rng.shuffle(std::span<const env::TableMeta*>(shuffled));
        const std::size_t n_rel = std::min<std::size_t>(2, shuffled.size());
        std::vector<const env::TableMeta*> relevant(shuffled.begin(), shuffled.begin() + static_cast<long>(n_rel));
        std::vector<const env::TableMeta*> others(shuffled.begin() + static_cast<long>(n_rel), shuffled.end());
        std::vector<Fact> pool;
        for (int i = 0; i < 4; ++i) {
            if (auto f = sample_fact(db, *relevant[static_cast<std::size_t>(i) % n_rel], task_rng)) pool.push_back(*f);
        }

        for (int e = 0; e < o.episodes_per_task; ++e) {
            Rng rng(mix_seed({o.seed, fnv1a64(task.id), static_cast<std::uint64_t>(e) + 1}));
            ScriptedEpisode ep;
            ep.task_id = task.id;

            std::vector<const env::TableMeta*> touch = relevant;
            for (const auto* t : others) {
                if (rng.uniform01() < 0.5 * difficulty) touch.push_back(t);
            }
            const double step_lp = -0.05;
            if (rng.uniform01() < 0.3 * difficulty) {
                ep.non_terminating = true;
                for (int s = 0; s < o.max_calls; ++s) {
                    const auto* t = touch[static_cast<std::size_t>(s) % touch.size()];
                    ep.steps.push_back(scripted_from_proposal(
                        make_proposal(env::SqlQuery{"SELECT COUNT(*) FROM " + t->name}, {}, step_lp)));
                }
                pb.add(std::move(ep));
                continue;
            }

            const auto max_lookups = static_cast<std::size_t>(o.max_calls - 1);
            if (touch.size() > max_lookups) touch.resize(max_lookups);
            for (std::size_t i = 0; i < touch.size(); ++i) {
                const env::Action a = i == 0 ? env::Action(env::SchemaLookup{touch[i]->name})
                                             : env::Action(env::SqlQuery{"SELECT * FROM " + touch[i]->name + " LIMIT 5"});
                ep.steps.push_back(scripted_from_proposal(make_proposal(a, {}, step_lp)));
            }

            std::vector<Fact> lines;
            for (const auto& f : pool) {
                if (rng.uniform01() < 1.0 - 0.6 * difficulty) lines.push_back(f);
            }
            if (lines.empty() && !pool.empty()) lines.push_back(pool[rng.uniform_index(pool.size())]);
            std::vector<bool> grounded(lines.size(), true);
            for (int h = 0; h < 3; ++h) {
                if (rng.uniform01() < difficulty) {
                    lines.push_back(hallucinated_fact(*touch[rng.uniform_index(touch.size())], rng));
                    grounded.push_back(false);
                }
            }
            if (lines.empty()) {
                lines.push_back(hallucinated_fact(*touch.front(), rng));
                grounded.push_back(false);
            }

            std::string summary;
            std::vector<double> lps;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                if (i > 0) summary += "\n";
                const auto words = word_pieces(lines[i].line);
                for (std::size_t w = 0; w < words.size(); ++w) {
                    const double u = rng.uniform01();
                    const double lp = grounded[i] ? -(0.02 + 0.3 * difficulty * u) : -(0.5 + 1.5 * u);
                    lps.push_back(lp);
                }
                summary += lines[i].line;
            }
            ep.steps.push_back(scripted_from_proposal(make_proposal(env::CommitSummary{summary}, lps, 0.0)));
            pb.add(std::move(ep));
        }
    }
    return pb;
}

}  // namespace uta::policy
