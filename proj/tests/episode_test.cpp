#include "test_support.hpp"

#include "uta/environment/episode.hpp"
#include "uta/environment/synthetic.hpp"
#include "uta/environment/tools.hpp"
#include "uta/policy/mock.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace uta;
using nlohmann::json;

namespace {

const env::TaskSpec kTask{"q1", "tmpl", "Describe BRCA patients", {{"CANCER_TYPE", "BRCA"}}};

policy::MockPolicy playbook_policy(const std::string& jsonl) {
    return policy::MockPolicy(policy::Playbook::from_jsonl(jsonl));
}

std::vector<std::int64_t> row_counts(const env::DatabaseHandle& db) {
    std::vector<std::int64_t> out;
    for (const auto& t : env::snapshot_schema(db)) {
        const auto r = env::execute_sql(db, "SELECT COUNT(*) FROM " + t.name);
        out.push_back(r.payload[0][0].get<std::int64_t>());
    }
    return out;
}

}  // namespace

TEST(Episode, CommitAtFirstStep) {
    const env::Environment environment(test::small_db());
    auto pol = playbook_policy(
        R"({"task_id":"q1","steps":[{"tool":"commit","args":{"summary":"two words"},"summary_logprobs":[-0.5,-1.5]}]})");
    const auto t = env::run_episode(kTask, environment, pol);
    ASSERT_EQ(t.steps.size(), 1u);
    ASSERT_TRUE(t.committed());
    EXPECT_EQ(t.terminated_by, env::Termination::commit);
    EXPECT_EQ(t.summary->text, "two words");
    EXPECT_EQ(t.summary->logprobs, (std::vector<double>{-0.5, -1.5}));
    EXPECT_EQ(t.trajectory_id, "q1/0");
}

TEST(Episode, NeverCommittingUsesWholeBudget) {
    const env::Environment environment(test::small_db());
    std::string steps;
    for (int i = 0; i < 6; ++i) steps += std::string(i ? "," : "") + R"({"tool":"sql","args":{"query":"SELECT 1"}})";
    auto pol = playbook_policy(R"({"task_id":"*","non_terminating":true,"steps":[)" + steps + "]}");
    const auto t = env::run_episode(kTask, environment, pol, {.max_calls = 6});
    EXPECT_EQ(t.steps.size(), 6u);
    EXPECT_FALSE(t.committed());
    EXPECT_EQ(t.terminated_by, env::Termination::step_budget);
    EXPECT_FALSE(env::to_json(t).contains("summary") && !env::to_json(t)["summary"].is_null());
}

TEST(Episode, SqlSchemaCommitAggregatesTouchedTables) {
    const auto db = test::small_db();
    const env::Environment environment(db);
    const auto before = row_counts(db);
    auto pol = playbook_policy(
        R"({"task_id":"q1","steps":[{"tool":"sql","args":{"query":"SELECT * FROM genes"}},)"
        R"({"tool":"schema","args":{"table":"patients"}},)"
        R"({"tool":"commit","args":{"summary":"done"}}]})");
    const auto t = env::run_episode(kTask, environment, pol);
    ASSERT_EQ(t.steps.size(), 3u);
    EXPECT_EQ(t.tables_touched(), (std::set<std::string>{"genes", "patients"}));
    EXPECT_TRUE(std::holds_alternative<env::CommitSummary>(*t.steps.back().action));
    EXPECT_EQ(row_counts(db), before);
    for (const auto& s : t.steps) {
        for (const auto& name : s.result.tables_touched) EXPECT_NE(db.find_table(name), nullptr);
    }
}

TEST(Episode, UnparseableProposalIsFailedStep) {
    const env::Environment environment(test::small_db());
    auto pol = playbook_policy(R"({"task_id":"q1","steps":[{"raw_text":"I think I will look around"},)"
                               R"({"raw_text":"{\"tool\":\"drop\",\"args\":{}}"},)"
                               R"({"tool":"commit","args":{"summary":"ok"}}]})");
    const auto t = env::run_episode(kTask, environment, pol);
    ASSERT_EQ(t.steps.size(), 3u);
    EXPECT_FALSE(t.steps[0].action.has_value());
    EXPECT_EQ(t.steps[0].raw_text, "I think I will look around");
    EXPECT_FALSE(t.steps[0].result.ok);
    EXPECT_NE(t.steps[1].result.error_text->find("unknown_tool"), std::string::npos);
    EXPECT_TRUE(t.committed());
}

TEST(Episode, UnlocatableSummarySpanEndsUncommitted) {
    const env::Environment environment(test::small_db());
    // Tokens that do not reproduce the text and carry no offsets.
    auto pol = playbook_policy(
        R"({"task_id":"q1","steps":[{"raw_text":"{\"tool\":\"commit\",\"args\":{\"summary\":\"hi\"}}","tokens":["hi"],"logprobs":[-1]}]})");
    const auto t = env::run_episode(kTask, environment, pol);
    ASSERT_EQ(t.steps.size(), 1u);
    EXPECT_FALSE(t.committed());
    EXPECT_EQ(t.terminated_by, env::Termination::commit);
    EXPECT_FALSE(t.steps[0].result.ok);
}

TEST(Episode, LengthNeverExceedsBudgetAndCommitIsLast) {
    const env::Environment environment(test::small_db());
    const std::string sql = R"({"tool":"sql","args":{"query":"SELECT 1"}})";
    const std::string commit = R"({"tool":"commit","args":{"summary":"s"}})";
    for (int n_sql = 0; n_sql < 9; ++n_sql) {
        std::string steps;
        for (int i = 0; i < n_sql; ++i) steps += sql + ",";
        steps += commit;
        auto pol = playbook_policy(R"({"task_id":"q1","steps":[)" + steps + "]}");
        for (int budget = 1; budget <= 7; ++budget) {
            const auto t = env::run_episode(kTask, environment, pol, {.max_calls = budget});
            EXPECT_LE(static_cast<int>(t.steps.size()), budget);
            for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) {
                EXPECT_FALSE(t.steps[i].action && env::is_commit(*t.steps[i].action));
            }
            EXPECT_EQ(t.committed(), n_sql < budget);
        }
    }
    auto pol = playbook_policy(R"({"task_id":"q1","steps":[)" + commit + "]}");
    EXPECT_THROW(env::run_episode(kTask, environment, pol, {.max_calls = 0}), ConfigError);
}

TEST(Episode, ReplayIsByteIdentical) {
    const auto db = env::synthetic_omics({});
    const env::Environment environment(db);
    const std::vector<env::TaskSpec> tasks{{"a", "x", "task a", {}}, {"b", "x", "task b", {}}};
    policy::MockPolicy pol(policy::synthesize_playbook(db, tasks, {}));
    for (int r = 0; r < 5; ++r) {
        const auto t1 = env::run_episode(tasks[0], environment, pol, {.seed = 3, .rollout = r});
        const auto t2 = env::run_episode(tasks[0], environment, pol, {.seed = 3, .rollout = r});
        EXPECT_EQ(env::to_json(t1).dump(), env::to_json(t2).dump());
    }
}

TEST(Episode, StateDigestsDifferAcrossSteps) {
    const env::Environment environment(test::small_db());
    auto pol = playbook_policy(R"({"task_id":"q1","steps":[{"tool":"sql","args":{"query":"SELECT 1"}},)"
                               R"({"tool":"commit","args":{"summary":"s"}}]})");
    const auto t = env::run_episode(kTask, environment, pol);
    ASSERT_EQ(t.steps.size(), 2u);
    EXPECT_NE(t.steps[0].state_digest, t.steps[1].state_digest);
    EXPECT_EQ(t.steps[0].state_digest.size(), 16u);
}

TEST(Episode, ScriptedUnderflowPropagates) {
    const env::Environment environment(test::small_db());
    auto pol = playbook_policy(
        R"({"task_id":"q1","non_terminating":true,"steps":[{"tool":"sql","args":{"query":"SELECT 1"}}]})");
    EXPECT_THROW(env::run_episode(kTask, environment, pol, {.max_calls = 3}), policy::ScriptedUnderflow);
    env::TaskSpec other = kTask;
    other.id = "elsewhere";
    EXPECT_THROW(env::run_episode(other, environment, pol), policy::ScriptedUnderflow);
}

TEST(Episode, RenderResultTruncates) {
    env::ToolResult r;
    r.ok = true;
    r.payload = std::string(50, 'x');
    EXPECT_EQ(env::render_result(r, 10), std::string(10, 'x') + "...");
    EXPECT_EQ(env::render_result(env::ToolResult::failure("bad"), 100), "error: bad");
}
