#include "uta/rewards/rewards.hpp"

#include "uta/error.hpp"
#include "uta/uncertainty/uncertainty.hpp"

#include "environment/sqlite_util.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <sqlite3.h>

namespace uta::rewards {

using nlohmann::json;

double r_code(std::int64_t x) {
    if (x < 0) {
        throw DomainError("r_code needs x >= 0");
    }
    if (x >= 3) {
        return 1.0;  // ln 31 / ln 31, pinned so the cap is exact
    }
    return std::min(1.0, std::log(10.0 * static_cast<double>(x) + 1.0) / std::log(31.0));
}

double r_judge(std::int64_t c) {
    if (c < 0) {
        throw DomainError("r_judge needs c >= 0");
    }
    return std::min(static_cast<double>(c) / 20.0, 1.0);
}

double r_conf(std::optional<double> u_perp) {
    if (!u_perp) {
        return 0.0;
    }
    if (!(*u_perp >= 1.0)) {
        throw DomainError("r_conf needs u_perp >= 1");
    }
    return 1.0 / *u_perp;
}

std::int64_t count_correct_executions(const env::Trajectory& traj) {
    std::int64_t x = 0;
    for (const auto& s : traj.steps) {
        if (!s.action || !s.result.ok) continue;
        if (std::holds_alternative<env::SqlQuery>(*s.action) || std::holds_alternative<env::CodeTool>(*s.action)) {
            ++x;
        }
    }
    return x;
}

const char* to_string(ScheduleKind kind) noexcept {
    switch (kind) {
        case ScheduleKind::zero: return "zero";
        case ScheduleKind::base: return "base";
        case ScheduleKind::phase: return "phase";
        case ScheduleKind::step: return "step";
        case ScheduleKind::adapt: return "adapt";
    }
    return "zero";
}

ScheduleKind parse_schedule(std::string_view name) {
    for (const auto k : kAllSchedules) {
        if (name == to_string(k)) return k;
    }
    throw ConfigError("unknown schedule '" + std::string(name) + "' (expected zero, base, phase, step or adapt)");
}

Weights schedule_weights(ScheduleKind kind, int t, double r_judge_value, const ScheduleParams& p) {
    if (t < 1) {
        throw DomainError("training step must be >= 1");
    }
    Weights w{p.alpha_code, p.alpha_judge, 0.0};
    switch (kind) {
        case ScheduleKind::zero:
            break;
        case ScheduleKind::base:
            w.conf = p.base_conf;
            break;
        case ScheduleKind::phase:
            w.conf = t <= p.phase_boundary ? 0.0 : p.base_conf;
            break;
        case ScheduleKind::step:
            w.conf = t % p.step_period == 0 ? p.step_boost : 0.0;
            break;
        case ScheduleKind::adapt: {
            const double d = r_judge_value - p.adapt_center;
            w.conf = p.adapt_peak * std::exp(-p.adapt_sharpness * d * d);
            break;
        }
    }
    return w;
}

std::vector<std::string> summary_lines(std::string_view summary) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= summary.size()) {
        const std::size_t nl = summary.find('\n', start);
        const std::size_t end = nl == std::string_view::npos ? summary.size() : nl;
        std::string_view line = summary.substr(start, end - start);
        const auto b = line.find_first_not_of(" \t\r");
        if (b != std::string_view::npos) {
            const auto e = line.find_last_not_of(" \t\r");
            out.emplace_back(line.substr(b, e - b + 1));
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

std::optional<FactTriple> parse_fact_line(std::string_view line) {
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string_view::npos) return std::nullopt;
    line.remove_prefix(b);
    if (line.starts_with("- ") || line.starts_with("* ")) line.remove_prefix(2);
    const auto eq = line.find(" = ");
    if (eq == std::string_view::npos) return std::nullopt;
    const std::string_view lhs = line.substr(0, eq);
    std::string_view value = line.substr(eq + 3);
    const auto dot = lhs.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == lhs.size()) return std::nullopt;
    const auto ve = value.find_last_not_of(" \t\r");
    if (ve == std::string_view::npos) return std::nullopt;
    value = value.substr(0, ve + 1);
    return FactTriple{std::string(lhs.substr(0, dot)), std::string(lhs.substr(dot + 1)), std::string(value)};
}

bool fact_grounded(const env::DatabaseHandle& db, const FactTriple& fact) {
    const auto* t = db.find_table(fact.table);
    if (t == nullptr || !t->has_column(fact.column)) return false;
    const std::string sql = "SELECT 1 FROM " + env::detail::quote_ident(fact.table) + " WHERE CAST(" +
                            env::detail::quote_ident(fact.column) + " AS TEXT) = ?1 LIMIT 1";
    auto stmt = env::detail::prepare(db.connection(), sql);
    sqlite3_bind_text(stmt.get(), 1, fact.value.data(), static_cast<int>(fact.value.size()), SQLITE_TRANSIENT);
    if (sqlite3_step(stmt.get()) == SQLITE_ROW) return true;

    // Numeric cells render differently through CAST; compare the rendered form too.
    const auto col = std::find_if(t->columns.begin(), t->columns.end(), [&](const auto& c) { return c.name == fact.column; });
    if (col->type != "NUMERIC") return false;
    for (const auto& row : db.read_rows(fact.table)) {
        for (std::size_t c = 0; c < t->columns.size(); ++c) {
            if (t->columns[c].name == fact.column && env::cell_to_string(row[c]) == fact.value) return true;
        }
    }
    return false;
}

std::int64_t MockJudge::count_facts(const env::Trajectory& traj) {
    if (!traj.summary) return 0;
    std::set<FactTriple> seen;
    for (const auto& line : summary_lines(traj.summary->text)) {
        if (auto f = parse_fact_line(line); f && fact_grounded(db_, *f)) {
            seen.insert(*f);
        }
    }
    return static_cast<std::int64_t>(seen.size());
}

const char* to_string(ConfidenceKind kind) noexcept {
    switch (kind) {
        case ConfidenceKind::perplexity: return "perplexity";
        case ConfidenceKind::token_entropy: return "token_entropy";
        case ConfidenceKind::retrieval_variance: return "retrieval_variance";
    }
    return "perplexity";
}

ConfidenceKind parse_confidence(std::string_view name) {
    for (const auto k : {ConfidenceKind::perplexity, ConfidenceKind::token_entropy, ConfidenceKind::retrieval_variance}) {
        if (name == to_string(k)) return k;
    }
    throw ConfigError("unknown confidence signal '" + std::string(name) + "'");
}

json to_json(const RewardBreakdown& r) {
    return json{{"x", r.x},
                {"c", r.c},
                {"r_code", r.r_code},
                {"r_judge", r.r_judge},
                {"r_conf", r.r_conf},
                {"u_perp", r.u_perp ? json(*r.u_perp) : json(nullptr)},
                {"weights", {{"code", r.weights.code}, {"judge", r.weights.judge}, {"conf", r.weights.conf}}},
                {"total", r.total}};
}

double token_entropy_confidence(const env::Trajectory& traj, double vocab_size) {
    if (!traj.summary || traj.summary->logprobs.empty()) return 0.0;
    double s = 0.0;
    for (const double lp : traj.summary->logprobs) s -= lp;
    const double mean = s / static_cast<double>(traj.summary->logprobs.size());
    return 1.0 - std::clamp(mean / std::log(vocab_size), 0.0, 1.0);
}

double retrieval_variance_confidence(std::span<const env::Trajectory> mini) {
    if (mini.empty()) return 0.0;
    double mean = 0.0;
    for (const auto& t : mini) mean += static_cast<double>(t.tables_touched().size());
    mean /= static_cast<double>(mini.size());
    double var = 0.0;
    for (const auto& t : mini) {
        const double d = static_cast<double>(t.tables_touched().size()) - mean;
        var += d * d;
    }
    var /= static_cast<double>(mini.size());
    return 1.0 / (1.0 + var);
}

std::optional<RewardBreakdown> total_reward(const env::Trajectory& traj, ScheduleKind kind, int t, Judge& judge,
                                            const RewardOptions& options, std::vector<std::string>* warnings,
                                            std::span<const env::Trajectory> mini_rollouts) {
    RewardBreakdown r;
    r.x = count_correct_executions(traj);
    r.r_code = rewards::r_code(r.x);

    std::optional<std::int64_t> c;
    std::string last_error;
    for (int attempt = 0; attempt <= options.judge_max_retries && !c; ++attempt) {
        try {
            c = judge.count_facts(traj);
        } catch (const BackendError& e) {
            last_error = e.what();
            if (!e.retriable()) break;
        }
    }
    if (!c) {
        if (warnings != nullptr) {
            warnings->push_back("dropped trajectory " + traj.trajectory_id + ": judge failed: " + last_error);
        }
        return std::nullopt;
    }
    // Summary-dependent rewards are zero without a committed summary.
    r.c = traj.summary ? *c : 0;
    r.r_judge = rewards::r_judge(r.c);

    if (traj.summary) {
        r.u_perp = uq::perplexity(traj.summary->logprobs);
    }
    switch (options.confidence) {
        case ConfidenceKind::perplexity: r.r_conf = rewards::r_conf(r.u_perp); break;
        case ConfidenceKind::token_entropy: r.r_conf = token_entropy_confidence(traj, options.vocab_size); break;
        case ConfidenceKind::retrieval_variance:
            r.r_conf = traj.summary ? retrieval_variance_confidence(mini_rollouts) : 0.0;
            break;
    }

    r.weights = schedule_weights(kind, t, options.adapt_r_judge.value_or(r.r_judge), options.schedule);
    r.total = r.weights.code * r.r_code + r.weights.judge * r.r_judge + r.weights.conf * r.r_conf;
    return r;
}

}  // namespace uta::rewards
