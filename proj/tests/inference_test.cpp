#include "oracles.hpp"
#include "test_support.hpp"

#include "uta/environment/synthetic.hpp"
#include "uta/environment/tools.hpp"
#include "uta/error.hpp"
#include "uta/inference/inference.hpp"
#include "uta/policy/mock.hpp"
#include "uta/rng.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace uta;
using nlohmann::json;

namespace {

std::string commit_step(const std::string& summary, double lp) {
    return R"({"tool":"commit","args":{"summary":")" + summary + R"("},"summary_logprobs":[)" + std::to_string(lp) + "]}";
}

std::string sql_step(const std::string& table) {
    return R"({"tool":"sql","args":{"query":"SELECT * FROM )" + table + R"("}})";
}

policy::MockPolicy fixture_policy() {
    // Table genes in 2 of 5 rollouts, patients in all 5.
    std::string jsonl;
    for (int k = 0; k < 5; ++k) {
        std::string steps = sql_step("patients") + ",";
        if (k < 2) steps += sql_step("genes") + ",";
        steps += commit_step("summary" + std::to_string(k % 2), -0.1 * (k + 1));
        jsonl += R"({"task_id":"*","steps":[)" + steps + "]}\n";
    }
    return policy::MockPolicy(policy::Playbook::from_jsonl(jsonl));
}

uq::UncertaintyReport report_with(double u_ret, std::optional<double> u_cocoa, std::vector<std::optional<double>> perps) {
    uq::UncertaintyReport r;
    r.u_ret = u_ret;
    r.u_cocoa = u_cocoa;
    r.u_perp = std::move(perps);
    for (std::size_t i = 0; i < r.u_perp.size(); ++i) {
        if (r.u_perp[i] && (!r.star_index || *r.u_perp[i] < *r.u_perp[*r.star_index])) r.star_index = i;
    }
    return r;
}

}  // namespace

TEST(Infer, RetrievalFixture) {
    const env::Environment environment(test::small_db());
    auto pol = fixture_policy();
    infer::InferenceConfig cfg;
    const auto res = infer::infer({"q", "", "text", {}}, environment, pol, cfg);
    ASSERT_EQ(res.trajectories.size(), 5u);
    EXPECT_NEAR(res.report.u_ret, (oracle::h2(0.4) + oracle::h2(1.0)) / 2.0, 1e-12);
    EXPECT_EQ(res.report.star_index, 0u);
    std::set<std::uint64_t> seeds;
    for (const auto& t : res.trajectories) seeds.insert(t.seed);
    EXPECT_EQ(seeds.size(), 5u);
    EXPECT_EQ(res.trajectories[3].trajectory_id, "q/r0/k3");
}

TEST(Infer, IdenticalCommitsGiveZeroCocoa) {
    const env::Environment environment(test::small_db());
    policy::MockPolicy pol(policy::Playbook::from_jsonl(R"({"task_id":"*","steps":[)" + commit_step("same", -0.4) + "]}"));
    infer::InferenceConfig cfg;
    cfg.k = 2;
    const auto res = infer::infer({"q", "", "text", {}}, environment, pol, cfg);
    EXPECT_EQ(*res.report.u_cons, 0.0);
    EXPECT_EQ(*res.report.u_cocoa, 0.0);
}

TEST(Infer, PartialCommitPool) {
    const env::Environment environment(test::small_db());
    std::string jsonl;
    for (int k = 0; k < 5; ++k) {
        if (k < 3) {
            jsonl += R"({"task_id":"*","steps":[)" + sql_step("genes") + "," + commit_step("s", -0.2) + "]}\n";
        } else {
            jsonl += R"({"task_id":"*","non_terminating":true,"steps":[)" + sql_step("patients") + "," + sql_step("patients") +
                     "]}\n";
        }
    }
    policy::MockPolicy pol(policy::Playbook::from_jsonl(jsonl));
    infer::InferenceConfig cfg;
    cfg.max_calls = 2;
    const auto res = infer::infer({"q", "", "text", {}}, environment, pol, cfg);
    EXPECT_EQ(res.report.pool_size, 3u);
    EXPECT_NEAR(res.report.u_ret, (oracle::h2(0.6) + oracle::h2(0.4)) / 2.0, 1e-12);
    EXPECT_EQ(res.report.u_perp.size(), 5u);
}

TEST(Filter, Rule) {
    const auto r = report_with(0.4, 0.3, {1.5, 1.2, std::nullopt});
    const auto d = infer::filter(r, 0.5);
    EXPECT_TRUE(d.emit);
    EXPECT_EQ(d.index, 1u);
    EXPECT_EQ(d.threshold, 1.0);
    EXPECT_FALSE(infer::filter(r, 0.0).emit);
    EXPECT_EQ(infer::filter(r, 0.0).reason, "threshold");
    EXPECT_TRUE(infer::filter(r, 1e6).emit);
    const auto none = report_with(0.2, std::nullopt, {std::nullopt, std::nullopt});
    EXPECT_FALSE(infer::filter(none, 1e6).emit);
    EXPECT_EQ(infer::filter(none, 1e6).reason, "no-summary");
    // Equality emits.
    EXPECT_TRUE(infer::filter(report_with(0.5, 0.5, {1.0}), 0.5).emit);
}

TEST(Filter, MonotoneInKappaAndEmitsLowestPerplexity) {
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::optional<double>> perps;
        for (int k = 0; k < 5; ++k) perps.push_back(rng.uniform01() < 0.2 ? std::nullopt : std::optional(1 + 3 * rng.uniform01()));
        const bool any = std::any_of(perps.begin(), perps.end(), [](auto& p) { return p.has_value(); });
        const auto r = report_with(rng.uniform01(), any ? std::optional(2 * rng.uniform01()) : std::nullopt, perps);
        bool emitted = false;
        for (double kappa = 0.0; kappa <= 2.0; kappa += 0.05) {
            const auto d = infer::filter(r, kappa);
            if (emitted) EXPECT_TRUE(d.emit);
            emitted = d.emit;
            if (d.emit) {
                for (const auto& p : perps) {
                    if (p) EXPECT_LE(*perps[*d.index], *p);
                }
            }
        }
    }
}

TEST(Batch, RecordCountsAndEmptyTaskSet) {
    const auto db = env::synthetic_omics({});
    const env::Environment environment(db);
    std::vector<env::TaskSpec> tasks;
    for (int i = 0; i < 20; ++i) tasks.push_back({"task-" + std::to_string(i), "x", "text", {}});
    policy::MockPolicy pol(policy::synthesize_playbook(db, tasks, {}));
    infer::InferenceConfig cfg;
    std::ostringstream report;
    const auto s = infer::batch_infer(tasks, environment, pol, cfg, {&report, nullptr});
    EXPECT_EQ(s.records, 100u);
    std::istringstream in(report.str());
    std::size_t lines = 0;
    json last;
    for (std::string line; std::getline(in, line); ++lines) last = json::parse(line);
    EXPECT_EQ(lines, 101u);
    EXPECT_EQ(last["schema"], infer::kAggregateSchema);

    std::ostringstream empty;
    const auto e = infer::batch_infer({}, environment, pol, cfg, {&empty, nullptr});
    EXPECT_EQ(e.records, 0u);
    const std::string text = empty.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(Batch, ByteIdenticalAcrossRunsAndJobs) {
    const auto db = env::synthetic_omics({});
    const env::Environment environment(db);
    std::vector<env::TaskSpec> tasks;
    for (int i = 0; i < 6; ++i) tasks.push_back({"task-" + std::to_string(i), "x", "text", {}});
    policy::MockPolicy pol(policy::synthesize_playbook(db, tasks, {}));
    infer::InferenceConfig cfg;
    cfg.repeats = 2;
    std::ostringstream a, at, b, bt;
    infer::batch_infer(tasks, environment, pol, cfg, {&a, &at});
    cfg.jobs = 4;
    infer::batch_infer(tasks, environment, pol, cfg, {&b, &bt});
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(at.str(), bt.str());
}

TEST(Batch, FailuresAreRecordedAndRunContinues) {
    const env::Environment environment(test::small_db());
    policy::MockPolicy pol(policy::Playbook::from_jsonl(R"({"task_id":"good","steps":[)" + commit_step("s", -0.1) + "]}"));
    infer::InferenceConfig cfg;
    cfg.repeats = 1;
    std::ostringstream out;
    const auto s = infer::batch_infer({{"good", "", "x", {}}, {"missing", "", "y", {}}}, environment, pol, cfg, {&out, nullptr});
    EXPECT_EQ(s.records, 2u);
    EXPECT_EQ(s.errors, 1u);
    std::istringstream in(out.str());
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    EXPECT_NE(json::parse(l1)["decision"], "error");
    EXPECT_EQ(json::parse(l2)["decision"], "error");
}

TEST(Report, SweepVerifyAndScoredItems) {
    const auto db = env::synthetic_omics({});
    const env::Environment environment(db);
    std::vector<env::TaskSpec> tasks;
    for (int i = 0; i < 8; ++i) tasks.push_back({"task-" + std::to_string(i), "x", "text", {}});
    policy::MockPolicy pol(policy::synthesize_playbook(db, tasks, {}));
    infer::InferenceConfig cfg;
    cfg.repeats = 1;
    test::TempDir dir("rep");
    {
        std::ofstream r(dir / "r.jsonl"), t(dir / "t.jsonl");
        infer::batch_infer(tasks, environment, pol, cfg, {&r, &t});
    }
    const auto rep = infer::read_report(dir / "r.jsonl");
    EXPECT_EQ(rep.records.size(), 8u);
    ASSERT_TRUE(rep.aggregate);
    EXPECT_TRUE(infer::verify_report(dir / "r.jsonl", dir / "t.jsonl").empty());

    const auto rows = infer::sweep_kappa(rep.records, {0.0, 0.2, 0.5, 0.8, 5.0});
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].abstention_rate, rows[i - 1].abstention_rate);
    EXPECT_NEAR(rows[2].coverage + rows[2].abstention_rate, 1.0, 1e-15);

    // Tamper with one stored value.
    std::string text = test::read_text(dir / "r.jsonl");
    auto first = json::parse(text.substr(0, text.find('\n')));
    first["u_ret"] = first["u_ret"].get<double>() + 0.125;
    first["uncertainty"]["u_ret"] = first["u_ret"];
    test::write_text(dir / "bad.jsonl", first.dump() + "\n" + text.substr(text.find('\n') + 1));
    EXPECT_FALSE(infer::verify_report(dir / "bad.jsonl", dir / "t.jsonl").empty());

    for (const auto& it : infer::scored_items(rep.records)) {
        EXPECT_GE(it.quality, 0.0);
        EXPECT_LE(it.quality, 1.0);
    }
}

TEST(Config, Validation) {
    infer::InferenceConfig c;
    c.k = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.kappa = -0.1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.seeds = {1, 2};
    EXPECT_THROW(c.validate(), ConfigError);
    c.seeds = {1, 2, 3, 4, 5};
    EXPECT_NO_THROW(c.validate());
    EXPECT_NE(infer::rollout_seed(c, "a", 0, 0), infer::rollout_seed(c, "a", 0, 1));
}
