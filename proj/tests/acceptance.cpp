// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "oracles.hpp"

#include "uta/environment/episode.hpp"
#include "uta/environment/synthetic.hpp"
#include "uta/environment/tools.hpp"
#include "uta/evaluation/evaluation.hpp"
#include "uta/grpo/objective.hpp"
#include "uta/grpo/toy.hpp"
#include "uta/inference/inference.hpp"
#include "uta/policy/mock.hpp"
#include "uta/rewards/rewards.hpp"
#include "uta/rng.hpp"
#include "uta/uncertainty/uncertainty.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace uta;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Collects failure notes for one criterion.
struct Check {
    std::vector<std::string> notes;
    void expect(bool ok, const std::string& what) {
        if (!ok && notes.size() < 5) notes.push_back(what);
    }
    bool ok() const { return notes.empty(); }
};

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

bool report(const std::string& name, const std::function<std::string(Check&)>& body) {
    Check c;
    std::string detail;
    const auto t0 = Clock::now();
    try {
        detail = body(c);
    } catch (const std::exception& e) {
        c.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    std::cout << (c.ok() ? "PASS " : "FAIL ") << name << " (" << num(secs) << " s)";
    if (!detail.empty()) std::cout << " " << detail;
    for (const auto& n : c.notes) std::cout << " | " << n;
    std::cout << std::endl;
    return c.ok();
}

// ---------------------------------------------------------------- formulas

std::string formula_suite(Check& c) {
    const auto t0 = Clock::now();
    c.expect(rewards::r_code(0) == 0.0, "r_code(0) != 0");
    c.expect(rewards::r_code(3) == 1.0, "r_code(3) != 1");
    c.expect(rewards::r_judge(20) == 1.0, "r_judge(20) != 1");
    const auto w5 = rewards::schedule_weights(rewards::ScheduleKind::adapt, 1, 0.5);
    const auto w0 = rewards::schedule_weights(rewards::ScheduleKind::adapt, 1, 0.0);
    c.expect(std::abs(w5.conf - 2.0) <= 1e-12, "adapt alpha_conf(0.5) = " + num(w5.conf));
    c.expect(std::abs(w0.conf - 2.0 * std::exp(-12.5)) <= 1e-12, "adapt alpha_conf(0) = " + num(w0.conf));
    c.expect(uq::binary_entropy(0.5) == 1.0, "H(0.5) != 1");
    c.expect(uq::binary_entropy(0.0) == 0.0 && uq::binary_entropy(1.0) == 0.0, "H(0) or H(1) != 0");
    const std::vector<double> uniform(16, -std::log(16.0));
    const double ppl = uq::perplexity(uniform);
    c.expect(std::abs(ppl - 16.0) <= 1e-9, "uniform V=16 perplexity = " + num(ppl));
    const std::vector<std::string> same{"tp53 is mutated", "tp53 is mutated"};
    const double u_cons = uq::consistency("tp53 is mutated", same, uq::token_f1);
    c.expect(u_cons == 0.0 && uq::cocoa(3.7, u_cons) == 0.0, "CoCoA for identical samples != 0");
    const double secs = seconds_since(t0);
    c.expect(secs < 1.0, "took " + num(secs) + " s");
    return "";
}

// ---------------------------------------------------------------- schedules

rewards::Weights table_row(rewards::ScheduleKind kind, int t, double rj) {
    const double third = 1.0 / 3.0;
    switch (kind) {
        case rewards::ScheduleKind::zero: return {1, 4, 0};
        case rewards::ScheduleKind::base: return {1, 4, third};
        case rewards::ScheduleKind::phase: return {1, 4, t <= 50 ? 0.0 : third};
        case rewards::ScheduleKind::step: return {1, 4, t % 10 == 0 ? 2.0 : 0.0};
        case rewards::ScheduleKind::adapt: return {1, 4, 2.0 * std::exp(-50.0 * (rj - 0.5) * (rj - 0.5))};
    }
    return {};
}

std::string schedule_trace(Check& c) {
    int compared = 0;
    for (const auto kind : rewards::kAllSchedules) {
        for (int t = 1; t <= 100; ++t) {
            for (const double rj : {0.0, 0.25, 0.5, 0.9, 1.0}) {
                const auto got = rewards::schedule_weights(kind, t, rj);
                const auto want = table_row(kind, t, rj);
                ++compared;
                c.expect(got == want, std::string(rewards::to_string(kind)) + " t=" + std::to_string(t) +
                                          " r_judge=" + num(rj) + " gives alpha_conf " + num(got.conf));
            }
        }
    }
    // Spot checks at the boundaries.
    using rewards::ScheduleKind;
    c.expect(rewards::schedule_weights(ScheduleKind::phase, 50, 0).conf == 0.0, "phase t=50");
    c.expect(rewards::schedule_weights(ScheduleKind::phase, 51, 0).conf == 1.0 / 3.0, "phase t=51");
    c.expect(rewards::schedule_weights(ScheduleKind::step, 40, 0).conf == 2.0, "step t=40");
    c.expect(rewards::schedule_weights(ScheduleKind::step, 41, 0).conf == 0.0, "step t=41");
    return std::to_string(compared) + " triples";
}

// ---------------------------------------------------------------- PRR

std::string prr_oracle(Check& c) {
    std::mt19937_64 gen(20240611);
    std::uniform_int_distribution<int> size(2, 8);
    std::uniform_int_distribution<int> level(0, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int defined = 0;
    int self = 0;
    double worst = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        const int n = size(gen);
        std::vector<eval::ScoredItem> items(static_cast<std::size_t>(n));
        for (auto& it : items) {
            // Coarse levels give ties in both columns.
            it.uncertainty = inst % 2 == 0 ? level(gen) / 4.0 : unit(gen);
            it.quality = inst % 3 == 0 ? level(gen) / 4.0 : unit(gen);
        }
        const auto got = eval::prr(items);
        const auto want = oracle::prr(items);
        c.expect(got.has_value() == want.has_value(), "instance " + std::to_string(inst) + ": definedness differs");
        if (got && want) {
            ++defined;
            worst = std::max(worst, std::abs(*got - *want));
            c.expect(std::abs(*got - *want) <= 1e-9,
                     "instance " + std::to_string(inst) + ": " + num(*got) + " vs " + num(*want));
        }

        auto perfect = items;
        for (auto& it : perfect) it.uncertainty = 1.0 - it.quality;
        if (const auto p = eval::prr(perfect)) {
            ++self;
            c.expect(std::abs(*p - 1.0) <= 1e-9, "instance " + std::to_string(inst) + ": PRR(1-q) = " + num(*p));
        }
    }
    c.expect(defined > 900, "too few defined instances: " + std::to_string(defined));
    return std::to_string(defined) + " defined, max |diff| " + num(worst) + ", " + std::to_string(self) +
           " self-checks";
}

// ---------------------------------------------------------------- C-index

std::string cindex_oracle(Check& c) {
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<int> small(0, 4);
    std::bernoulli_distribution event(0.7);
    int defined = 0;
    for (int inst = 0; inst < 500; ++inst) {
        std::vector<eval::SurvivalRecord> r(6);
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = {"p" + std::to_string(i), static_cast<double>(small(gen)), static_cast<double>(1 + small(gen)),
                    event(gen)};
        }
        const auto got = eval::c_index(r);
        const auto want = oracle::c_index(r);
        c.expect(got.has_value() == want.has_value(), "instance " + std::to_string(inst) + ": definedness differs");
        if (got && want) {
            ++defined;
            c.expect(*got == *want, "instance " + std::to_string(inst) + ": " + num(*got) + " vs " + num(*want));
        }
    }
    std::vector<eval::SurvivalRecord> ordered, tied;
    for (int i = 0; i < 6; ++i) {
        ordered.push_back({"o" + std::to_string(i), static_cast<double>(i), static_cast<double>(i + 1), true});
        tied.push_back({"t" + std::to_string(i), 0.5, static_cast<double>(i + 1), true});
    }
    c.expect(eval::c_index(ordered) == 1.0, "perfect ordering != 1");
    c.expect(eval::c_index(tied) == 0.5, "all-tied predictions != 0.5");
    return std::to_string(defined) + " defined instances";
}

// ---------------------------------------------------------------- GRPO mechanics

std::string grpo_mechanics(Check& c) {
    c.expect(grpo::clipped_term(2.0, 1.0, 0.2) == 1.2, "clip(r=2, A=1)");
    c.expect(grpo::clipped_term(0.5, -1.0, 0.2) == -0.8, "clip(r=0.5, A=-1)");
    const std::vector<double> r1{2.0}, a1{1.0}, r2{0.5}, a2{-1.0};
    c.expect(grpo::grpo_step_loss(r1, a1, 0.0, 0.2, 0.0) == 1.2, "step loss r=2");
    c.expect(grpo::grpo_step_loss(r2, a2, 0.0, 0.2, 0.0) == -0.8, "step loss r=0.5");

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> reward(0.0, 6.0);
    double worst_sum = 0.0;
    for (int g = 0; g < 200; ++g) {
        std::vector<double> rewards(2 + g % 7);
        for (auto& v : rewards) v = reward(gen);
        const auto adv = grpo::compute_advantages(rewards);
        double s = 0.0;
        for (double a : adv) s += a;
        worst_sum = std::max(worst_sum, std::abs(s));
    }
    c.expect(worst_sum < 1e-9, "advantage sum " + num(worst_sum));

    const auto toy = grpo::make_toy_environment({});
    std::vector<std::string> ids;
    for (const auto& t : toy.tasks) ids.push_back(t.id);
    grpo::ToyPolicy pol(ids, toy.table_names, 6);
    Rng rng(17);
    double worst_rel = 0.0;
    for (int probe = 0; probe < 10; ++probe) {
        std::vector<double> ref(pol.theta().size()), theta(ref.size()), old(ref.size());
        for (auto& v : ref) v = rng.normal(0.0, 0.5);
        for (auto& v : theta) v = rng.normal(0.0, 0.5);
        for (std::size_t i = 0; i < old.size(); ++i) old[i] = theta[i] + rng.normal(0.0, 0.1);
        pol.set_theta(ref);
        pol.freeze_reference();
        std::vector<grpo::Decision> decisions;
        for (int d = 0; d < 16; ++d) {
            grpo::Decision dec;
            dec.task = rng.uniform_index(pol.num_tasks());
            dec.step = rng.uniform_index(static_cast<std::size_t>(pol.max_calls()));
            dec.action = rng.uniform_index(pol.num_actions());
            dec.old_logprob = std::log(pol.probs(old, dec.task, dec.step)[dec.action]);
            dec.advantage = rng.normal();
            decisions.push_back(dec);
        }
        const double beta = 0.5;
        const auto obj = grpo::toy_objective(pol, theta, decisions, 0.2, beta);
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double h = 1e-5;
            auto plus = theta, minus = theta;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (grpo::toy_objective(pol, plus, decisions, 0.2, beta).value -
                               grpo::toy_objective(pol, minus, decisions, 0.2, beta).value) /
                              (2.0 * h);
            err += (fd - obj.gradient[i]) * (fd - obj.gradient[i]);
            norm += fd * fd;
        }
        const double rel = std::sqrt(err) / std::max(std::sqrt(norm), 1e-12);
        worst_rel = std::max(worst_rel, rel);
        c.expect(rel <= 1e-4, "probe " + std::to_string(probe) + " relative error " + num(rel));
    }
    return "max |sum adv| " + num(worst_sum) + ", max grad rel err " + num(worst_rel);
}

// ---------------------------------------------------------------- toy dynamics

double window_mean(const std::vector<grpo::CurvePoint>& curve, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += curve[i].mean_reward;
    return s / static_cast<double>(end - begin);
}

std::string toy_dynamics(Check& c, std::string* zero_detail, bool* zero_ok) {
    const auto t0 = Clock::now();
    grpo::TrainOptions o;
    o.schedule = rewards::ScheduleKind::zero;
    o.seed = 7;
    c.expect(o.grpo.steps == 100 && o.grpo.groups == 3 && o.grpo.rollouts == 4, "default run shape changed");
    c.expect(o.env.tables == 10 && o.env.relevant == 3, "default environment shape changed");
    const auto base = grpo::train_toy(o);
    const auto& curve = base.curve;
    c.expect(curve.size() == 100, "curve has " + std::to_string(curve.size()) + " points");
    const double first = window_mean(curve, 0, 10);
    const double last = window_mean(curve, curve.size() - 10, curve.size());
    c.expect(last >= 1.5 * first, "last-10 " + num(last) + " < 1.5 x first-10 " + num(first));

    auto strong = o;
    strong.grpo.beta = 10.0;
    auto weak = o;
    weak.grpo.beta = 0.01;
    const double kl_strong = grpo::train_toy(strong).curve.back().kl;
    const double kl_weak = grpo::train_toy(weak).curve.back().kl;
    c.expect(kl_strong < kl_weak, "KL(beta=10) " + num(kl_strong) + " >= KL(beta=0.01) " + num(kl_weak));

    const double secs = seconds_since(t0);
    c.expect(secs < 300.0, "runtime " + num(secs) + " s");

    *zero_ok = curve.back().mean_reward > curve.front().mean_reward;
    *zero_detail = "step 1 " + num(curve.front().mean_reward) + " -> step 100 " + num(curve.back().mean_reward);
    return "first-10 " + num(first) + ", last-10 " + num(last) + " (x" + num(last / first) + "), KL beta=10 " +
           num(kl_strong) + " vs beta=0.01 " + num(kl_weak);
}

// ---------------------------------------------------------------- inference

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string inference_determinism(Check& c) {
    const auto db = env::synthetic_omics({});
    const env::Environment environment(db);
    std::vector<env::TaskSpec> tasks;
    for (int i = 0; i < 20; ++i) tasks.push_back({"task-" + std::to_string(i), "acceptance", "Summarize.", {}});
    policy::MockPolicy pol(policy::synthesize_playbook(db, tasks, {}));
    infer::InferenceConfig cfg;
    cfg.k = 5;

    const fs::path dir = fs::temp_directory_path() / ("uta-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    for (const char* run : {"a", "b"}) {
        std::ofstream r(dir / (std::string(run) + ".jsonl"), std::ios::binary);
        std::ofstream t(dir / (std::string(run) + ".traj.jsonl"), std::ios::binary);
        if (std::string(run) == "b") cfg.jobs = 3;
        infer::batch_infer(tasks, environment, pol, cfg, {&r, &t});
    }
    const std::string a = read_file(dir / "a.jsonl");
    c.expect(!a.empty() && a == read_file(dir / "b.jsonl"), "reports differ between runs");
    c.expect(read_file(dir / "a.traj.jsonl") == read_file(dir / "b.traj.jsonl"), "trajectory logs differ");

    const auto rep = infer::read_report(dir / "a.jsonl");
    c.expect(rep.records.size() == 20u * static_cast<std::size_t>(cfg.repeats), "record count");
    const auto rows = infer::sweep_kappa(rep.records, {0.2, 0.5, 0.8});
    std::string rates;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rates += (i ? "/" : "") + num(rows[i].abstention_rate);
        if (i > 0) c.expect(rows[i].abstention_rate <= rows[i - 1].abstention_rate, "abstention increased with kappa");
    }
    const auto mismatches = infer::verify_report(dir / "a.jsonl", dir / "a.traj.jsonl");
    c.expect(mismatches.empty(), mismatches.empty() ? "" : "recompute mismatch: " + mismatches.front());
    fs::remove_all(dir);
    return std::to_string(rep.records.size()) + " records, abstention at kappa 0.2/0.5/0.8 = " + rates;
}

// ---------------------------------------------------------------- retrieval fixture

env::DatabaseHandle fixture_db() {
    env::DatabaseBuilder b;
    b.add_table({"patients",
                 {{"patient_id", "TEXT", ""}, {"cancer_type", "TEXT", ""}},
                 {{std::string("P1"), std::string("BRCA")}}});
    b.add_table({"genes", {{"patient_id", "TEXT", ""}, {"gene", "TEXT", ""}}, {{std::string("P1"), std::string("TP53")}}});
    return b.finish();
}

std::string retrieval_fixture(Check& c) {
    std::string jsonl;
    for (int k = 0; k < 5; ++k) {
        std::string steps = R"({"tool":"sql","args":{"query":"SELECT * FROM patients"}},)";
        if (k < 2) steps += R"({"tool":"sql","args":{"query":"SELECT * FROM genes"}},)";
        steps += R"({"tool":"commit","args":{"summary":"s"},"summary_logprobs":[-0.2]})";
        jsonl += R"({"task_id":"*","steps":[)" + steps + "]}\n";
    }
    policy::MockPolicy pol(policy::Playbook::from_jsonl(jsonl));
    const env::Environment environment(fixture_db());
    const auto res = infer::infer({"fixture", "", "text", {}}, environment, pol, {});
    // Binary entropy of 2-of-5 and 5-of-5, averaged.
    const auto H = [](double p) { return p <= 0 || p >= 1 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); };
    const double want = (H(0.4) + H(1.0)) / 2.0;
    c.expect(std::abs(res.report.u_ret - want) <= 1e-6, "u_ret " + num(res.report.u_ret) + " vs " + num(want));
    c.expect(std::abs(want - 0.48548) <= 1e-5, "oracle value " + num(want));
    return "u_ret " + num(res.report.u_ret) + ", oracle " + num(want);
}

// ---------------------------------------------------------------- sandbox absent

std::string sandbox_absent(Check& c) {
    const env::Environment environment(fixture_db());
    policy::MockPolicy pol(policy::Playbook::from_jsonl(
        R"({"task_id":"*","steps":[{"tool":"code","args":{"code":"print 1","tables":["genes"]}},)"
        R"({"tool":"sql","args":{"query":"SELECT * FROM genes"}},)"
        R"({"tool":"commit","args":{"summary":"genes.gene = TP53"},"summary_logprobs":[-0.1,-0.1,-0.1]}]})"));
    const auto traj = env::run_episode({"t", "", "text", {}}, environment, pol, {});
    c.expect(traj.steps.size() == 3, "steps " + std::to_string(traj.steps.size()));
    if (traj.steps.size() == 3) {
        const auto& code = traj.steps[0].result;
        c.expect(!code.ok && code.error_text && code.error_text->rfind("tool-unavailable", 0) == 0,
                 "code step did not report tool-unavailable");
    }
    c.expect(rewards::count_correct_executions(traj) == 1, "code failure counted as ok");
    return "";
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    bool all = true;
    all &= report("formula-suite", formula_suite);
    all &= report("schedule-trace", schedule_trace);
    all &= report("prr-oracle", prr_oracle);
    all &= report("cindex-oracle", cindex_oracle);
    all &= report("grpo-mechanics", grpo_mechanics);
    std::string zero_detail;
    bool zero_ok = false;
    all &= report("toy-dynamics", [&](Check& c) { return toy_dynamics(c, &zero_detail, &zero_ok); });
    all &= report("toy-zero-schedule-improves", [&](Check& c) {
        c.expect(zero_ok, "mean reward did not improve");
        return zero_detail;
    });
    all &= report("inference-determinism", inference_determinism);
    all &= report("retrieval-fixture", retrieval_fixture);
    all &= report("sandbox-absent", sandbox_absent);
    std::cout << (all ? "ALL PASS" : "SOME FAILED") << " in " << num(seconds_since(t0)) << " s" << std::endl;
    return all ? 0 : 1;
}
