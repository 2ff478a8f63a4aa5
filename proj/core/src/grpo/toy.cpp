#include "uta/grpo/toy.hpp"

#include "uta/environment/episode.hpp"
#include "uta/error.hpp"
#include "uta/parallel.hpp"
#include "uta/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace uta::grpo {

using nlohmann::json;

ToyEnvironment make_toy_environment(const ToyEnvOptions& o) {
    if (o.tables < 1 || o.relevant < 0 || o.relevant > o.tables || o.tasks < 1) {
        throw ConfigError("toy environment needs tables >= 1, 0 <= relevant <= tables, tasks >= 1");
    }
    ToyEnvironment out;
    out.facts_per_table = o.facts_per_table;
    Rng rng(o.seed);
    env::DatabaseBuilder b;
    for (int t = 0; t < o.tables; ++t) {
        char name[16];
        std::snprintf(name, sizeof name, "t%02d", t);
        env::TableData data;
        data.name = name;
        data.columns = {{"id", "NUMERIC", "row id"}, {"value", "NUMERIC", "measurement"}};
        for (int r = 0; r < o.rows_per_table; ++r) {
            data.rows.push_back({static_cast<std::int64_t>(r), std::round(rng.normal(0.0, 1.0) * 100.0) / 100.0});
        }
        out.table_names.emplace_back(name);
        b.add_table(std::move(data));
    }
    out.db = b.finish();

    std::vector<std::string> shuffled = out.table_names;
    rng.shuffle(std::span<std::string>(shuffled));
    out.relevant.insert(shuffled.begin(), shuffled.begin() + o.relevant);

    for (int k = 0; k < o.tasks; ++k) {
        env::TaskSpec task;
        task.id = "toy-" + std::to_string(k);
        task.template_id = "toy";
        task.text = "Summarize what the relevant tables contain (toy task " + std::to_string(k) + ").";
        out.tasks.push_back(std::move(task));
    }
    return out;
}

std::int64_t ToyJudge::count_facts(const env::Trajectory& traj) {
    if (!traj.committed()) return 0;
    std::int64_t c = 0;
    for (const auto& t : traj.tables_touched()) {
        if (relevant_.count(t) > 0) c += facts_;
    }
    return c;
}

ToyPolicy::ToyPolicy(std::vector<std::string> task_ids, std::vector<std::string> tables, int max_calls)
    : task_ids_(std::move(task_ids)), tables_(std::move(tables)), max_calls_(max_calls) {
    if (task_ids_.empty() || max_calls_ < 1) {
        throw ConfigError("toy policy needs at least one task and max_calls >= 1");
    }
    theta_.assign(task_ids_.size() * static_cast<std::size_t>(max_calls_) * num_actions(), 0.0);
    reference_ = theta_;
}

std::size_t ToyPolicy::task_index(const std::string& task_id) const {
    const auto it = std::find(task_ids_.begin(), task_ids_.end(), task_id);
    if (it == task_ids_.end()) throw DomainError("toy policy has no task '" + task_id + "'");
    return static_cast<std::size_t>(it - task_ids_.begin());
}

std::size_t ToyPolicy::action_index(const env::Action& action) const {
    if (env::is_commit(action)) return commit_action();
    if (const auto* q = std::get_if<env::SqlQuery>(&action)) {
        for (std::size_t i = 0; i < tables_.size(); ++i) {
            if (q->query == "SELECT COUNT(*) FROM " + tables_[i]) return i;
        }
    }
    throw DomainError("action is not on the toy menu");
}

std::vector<double> ToyPolicy::probs(std::size_t task, std::size_t step) const { return probs(theta_, task, step); }

std::vector<double> ToyPolicy::probs(const std::vector<double>& theta, std::size_t task, std::size_t step) const {
    const auto off = offset(task, step);
    return softmax(std::span<const double>(theta.data() + off, num_actions()));
}

void ToyPolicy::set_theta(std::vector<double> theta) {
    if (theta.size() != theta_.size()) throw DomainError("theta has the wrong shape");
    theta_ = std::move(theta);
}

namespace {

class ToySession : public policy::PolicySession {
public:
    ToySession(const ToyPolicy& policy, std::size_t task, std::uint64_t seed)
        : policy_(policy), task_(task), rng_(seed), seed_(seed) {}

    policy::ActionProposal propose(const policy::PromptContext& ctx) override {
        const std::size_t step = ctx.history.size();
        if (step >= static_cast<std::size_t>(policy_.max_calls())) {
            throw DomainError("toy policy asked for a step beyond max_calls");
        }
        const auto p = policy_.probs(task_, step);
        const std::size_t a = rng_.categorical(p);
        const double lp = std::log(p[a]);
        policy::ActionProposal out;
        if (a == policy_.commit_action()) {
            std::set<std::string> touched;
            for (const auto& h : ctx.history) {
                if (h.ok && h.action) {
                    if (const auto* q = std::get_if<env::SqlQuery>(&*h.action)) {
                        touched.insert(policy_.tables()[policy_.action_index(*q)]);
                    }
                }
            }
            std::string summary = "touched";
            for (const auto& t : touched) summary += " " + t;
            if (touched.empty()) summary += " none";
            const std::vector<double> lps(policy::word_pieces(summary).size(), lp);
            out = policy::make_proposal(env::CommitSummary{summary}, lps, 0.0);
        } else {
            out = policy::make_proposal(env::SqlQuery{"SELECT COUNT(*) FROM " + policy_.tables()[a]}, {}, lp);
        }
        out.sampling = {1.0, seed_};
        return out;
    }

private:
    const ToyPolicy& policy_;
    std::size_t task_;
    Rng rng_;
    std::uint64_t seed_;
};

}  // namespace

std::unique_ptr<policy::PolicySession> ToyPolicy::start(const env::TaskSpec& task, std::uint64_t seed, int) {
    return std::make_unique<ToySession>(*this, task_index(task.id), seed);
}

void ToyPolicy::save_checkpoint(const std::filesystem::path& path) const {
    const json j{{"format", "uta-toy-policy"},
                 {"version", 1},
                 {"layout", "theta[(task * max_calls + step) * actions + action]"},
                 {"tasks", task_ids_},
                 {"tables", tables_},
                 {"max_calls", max_calls_},
                 {"actions", num_actions()},
                 {"theta", theta_},
                 {"reference", reference_}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << j.dump(1) << "\n";
}

ToyPolicy ToyPolicy::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    try {
        const json j = json::parse(in);
        if (j.at("format") != "uta-toy-policy" || j.at("version") != 1) {
            throw DataError(path.string() + ": not a version 1 toy-policy checkpoint");
        }
        ToyPolicy p(j.at("tasks").get<std::vector<std::string>>(), j.at("tables").get<std::vector<std::string>>(),
                    j.at("max_calls").get<int>());
        p.set_theta(j.at("theta").get<std::vector<double>>());
        auto ref = j.at("reference").get<std::vector<double>>();
        if (ref.size() != p.theta().size()) throw DataError(path.string() + ": reference has the wrong shape");
        p.reference_ = std::move(ref);
        return p;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

ObjectiveValue toy_objective(const ToyPolicy& policy, const std::vector<double>& theta,
                             const std::vector<Decision>& decisions, double epsilon, double beta) {
    ObjectiveValue out;
    out.gradient.assign(theta.size(), 0.0);
    if (decisions.empty()) return out;
    const double n = static_cast<double>(decisions.size());
    const std::size_t na = policy.num_actions();
    double surrogate = 0.0;
    double kl_sum = 0.0;
    for (const auto& d : decisions) {
        const auto p = policy.probs(theta, d.task, d.step);
        const auto q = policy.probs(policy.reference(), d.task, d.step);
        const auto off = policy.offset(d.task, d.step);

        const double ratio = std::exp(std::log(p[d.action]) - d.old_logprob);
        if (!std::isfinite(ratio) || ratio <= 0.0) {
            throw DomainError("non-finite ratio for " + d.label);
        }
        surrogate += clipped_term(ratio, d.advantage, epsilon);
        const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
        if (ratio * d.advantage <= clipped * d.advantage) {
            // d ratio / d z_j = ratio * (1[j = a] - p_j)
            const double scale = d.advantage * ratio / n;
            for (std::size_t j = 0; j < na; ++j) {
                out.gradient[off + j] += scale * ((j == d.action ? 1.0 : 0.0) - p[j]);
            }
        }

        const double kl = categorical_kl(p, q);
        kl_sum += kl;
        if (beta != 0.0) {
            for (std::size_t j = 0; j < na; ++j) {
                const double lp = std::log(std::max(p[j], kProbabilityFloor));
                const double lq = std::log(std::max(q[j], kProbabilityFloor));
                out.gradient[off + j] -= beta / n * p[j] * (lp - lq - kl);
            }
        }
    }
    out.kl = kl_sum / n;
    out.value = surrogate / n - beta * out.kl;
    return out;
}

double mean_kl(const ToyPolicy& policy, const std::vector<Decision>& decisions) {
    if (decisions.empty()) return 0.0;
    double s = 0.0;
    for (const auto& d : decisions) {
        s += categorical_kl(policy.probs(d.task, d.step), policy.probs(policy.reference(), d.task, d.step));
    }
    return s / static_cast<double>(decisions.size());
}

namespace {

struct Adam {
    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
    void ascend(std::vector<double>& theta, const std::vector<double>& g, double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            theta[i] += lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
        }
    }
    std::vector<double> m, v;
    double b1 = 0.9, b2 = 0.999;
    int t = 0;
};

struct Rollout {
    env::Trajectory traj;
    std::optional<rewards::RewardBreakdown> reward;
    std::vector<std::string> warnings;
};

}  // namespace

TrainResult train_toy(const TrainOptions& o, rewards::Judge* judge) {
    o.grpo.validate();
    const ToyEnvironment toy = make_toy_environment(o.env);
    const env::Environment environment(toy.db);
    std::vector<std::string> task_ids;
    for (const auto& t : toy.tasks) task_ids.push_back(t.id);

    TrainResult result{{}, ToyPolicy(task_ids, toy.table_names, o.max_calls), {}};
    ToyPolicy& policy = result.policy;
    ToyJudge default_judge(toy.relevant, toy.facts_per_table);
    rewards::Judge& j = judge != nullptr ? *judge : default_judge;
    Adam adam(policy.theta().size());

    double judge_sum = 0.0;
    std::int64_t judge_n = 0;

    for (int step = 1; step <= o.grpo.steps; ++step) {
        const std::size_t n_roll = static_cast<std::size_t>(o.grpo.groups * o.grpo.rollouts);
        std::vector<Rollout> rollouts(n_roll);
        rewards::RewardOptions ropt = o.reward;
        if (o.adapt_running_mean && judge_n > 0) {
            ropt.adapt_r_judge = judge_sum / static_cast<double>(judge_n);
        }

        // Collection reads the policy only; updates happen after.
        parallel_for(n_roll, o.jobs, [&](std::size_t i) {
            const int g = static_cast<int>(i) / o.grpo.rollouts;
            const int r = static_cast<int>(i) % o.grpo.rollouts;
            const auto& task = toy.tasks[static_cast<std::size_t>((step - 1) * o.grpo.groups + g) % toy.tasks.size()];
            env::EpisodeOptions eo;
            eo.max_calls = o.max_calls;
            eo.seed = mix_seed({o.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(g),
                                static_cast<std::uint64_t>(r)});
            eo.rollout = r;
            eo.trajectory_id = "s" + std::to_string(step) + "/g" + std::to_string(g) + "/r" + std::to_string(r);
            Rollout& out = rollouts[i];
            out.traj = env::run_episode(task, environment, policy, eo);
            out.reward = rewards::total_reward(out.traj, o.schedule, step, j, ropt, &out.warnings);
        });

        CurvePoint point;
        point.step = step;
        std::vector<Decision> decisions;
        std::size_t scored = 0;
        for (int g = 0; g < o.grpo.groups; ++g) {
            std::vector<const Rollout*> members;
            for (int r = 0; r < o.grpo.rollouts; ++r) {
                const Rollout& ro = rollouts[static_cast<std::size_t>(g * o.grpo.rollouts + r)];
                result.warnings.insert(result.warnings.end(), ro.warnings.begin(), ro.warnings.end());
                if (!ro.reward) {
                    ++point.dropped;
                    continue;
                }
                members.push_back(&ro);
                point.mean_reward += ro.reward->total;
                point.r_code += ro.reward->r_code;
                point.r_judge += ro.reward->r_judge;
                point.conf_proxy += ro.reward->r_conf;
                point.alpha_conf += ro.reward->weights.conf;
                judge_sum += ro.reward->r_judge;
                ++judge_n;
                ++scored;
            }
            if (members.size() < 2) {
                result.warnings.push_back("step " + std::to_string(step) + ": group " + std::to_string(g) +
                                          " has fewer than two scored rollouts; skipped");
                continue;
            }
            std::vector<double> totals;
            for (const auto* m : members) totals.push_back(m->reward->total);
            const auto adv = compute_advantages(totals);
            for (std::size_t k = 0; k < members.size(); ++k) {
                const auto& traj = members[k]->traj;
                const std::size_t task = policy.task_index(traj.task_id);
                for (std::size_t s = 0; s < traj.steps.size(); ++s) {
                    if (!traj.steps[s].action) continue;
                    Decision d;
                    d.task = task;
                    d.step = s;
                    d.action = policy.action_index(*traj.steps[s].action);
                    d.old_logprob = std::log(policy.probs(task, s)[d.action]);
                    d.advantage = adv[k];
                    d.label = traj.trajectory_id + "#" + std::to_string(s);
                    decisions.push_back(std::move(d));
                }
            }
        }
        if (scored > 0) {
            const double n = static_cast<double>(scored);
            point.mean_reward /= n;
            point.r_code /= n;
            point.r_judge /= n;
            point.conf_proxy /= n;
            point.alpha_conf /= n;
        }

        for (int epoch = 0; epoch < o.grpo.epochs; ++epoch) {
            const auto obj = toy_objective(policy, policy.theta(), decisions, o.grpo.epsilon, o.grpo.beta);
            adam.ascend(policy.theta(), obj.gradient, o.grpo.learning_rate);
        }
        for (const double v : policy.theta()) {
            if (!std::isfinite(v)) {
                throw DomainError("toy training diverged at step " + std::to_string(step) +
                                  ": non-finite parameters (lr " + std::to_string(o.grpo.learning_rate) + ")");
            }
        }
        point.kl = mean_kl(policy, decisions);
        result.curve.push_back(point);
    }
    return result;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "step,mean_reward,r_code,r_judge,conf_proxy,kl,alpha_conf\n";
    out.precision(10);
    for (const auto& p : curve) {
        out << p.step << ',' << p.mean_reward << ',' << p.r_code << ',' << p.r_judge << ',' << p.conf_proxy << ','
            << p.kl << ',' << p.alpha_conf << '\n';
    }
    return out.str();
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << curve_csv(curve);
}

}  // namespace uta::grpo
