#include "test_support.hpp"

#include "uta/config/run_config.hpp"
#include "uta/environment/synthetic.hpp"
#include "uta/error.hpp"
#include "uta/tasks/tasks.hpp"

#include <gtest/gtest.h>

using namespace uta;
using nlohmann::json;

namespace {

std::vector<tasks::Binding> bindings(int n) {
    std::vector<tasks::Binding> out;
    for (int i = 0; i < n; ++i) out.push_back({{"CANCER_TYPE", "C" + std::to_string(i)}});
    return out;
}

}  // namespace

TEST(Tasks, ShippedTemplatesGiveEightyTwenty) {
    const auto templates = tasks::load_templates(UTA_TEMPLATES);
    ASSERT_EQ(templates.size(), 5u);
    const auto split = tasks::render_tasks(templates, bindings(20), 20, 7);
    EXPECT_EQ(split.train.size(), 80u);
    EXPECT_EQ(split.eval.size(), 20u);
    std::set<std::string> ids;
    for (const auto* part : {&split.train, &split.eval}) {
        for (const auto& t : *part) {
            EXPECT_TRUE(ids.insert(t.id).second) << t.id;
            EXPECT_EQ(t.text.find("{{"), std::string::npos);
            EXPECT_EQ(t.text.find("}}"), std::string::npos);
            EXPECT_FALSE(t.text.empty());
        }
    }
    EXPECT_EQ(ids.size(), 100u);
    const auto again = tasks::render_tasks(templates, bindings(20), 20, 7);
    for (std::size_t i = 0; i < again.eval.size(); ++i) EXPECT_EQ(again.eval[i].id, split.eval[i].id);
}

TEST(Tasks, SingleTaskGoesToTrain) {
    const auto templates = tasks::templates_from_json(
        json::parse(R"({"version":1,"templates":[{"id":"t","slots":["X"],"body":"About {{X}}.","objectives":["Say {{X}}"]}]})"));
    const auto split = tasks::render_tasks(templates, {{{"X", "v"}}}, 20, 1);
    ASSERT_EQ(split.train.size(), 1u);
    EXPECT_TRUE(split.eval.empty());
    EXPECT_EQ(split.train[0].placeholders.at("X"), "v");
    EXPECT_NE(split.train[0].text.find("About v."), std::string::npos);
    EXPECT_NE(split.train[0].text.find("Say v"), std::string::npos);
}

TEST(Tasks, PlaceholderErrors) {
    EXPECT_THROW(tasks::templates_from_json(json::parse(
                     R"({"version":1,"templates":[{"id":"t","slots":["X"],"body":"{{Y}}","objectives":[]}]})")),
                 DataError);
    const auto templates = tasks::templates_from_json(
        json::parse(R"({"version":1,"templates":[{"id":"tmpl","slots":["X"],"body":"{{X}}","objectives":[]}]})"));
    try {
        tasks::render_tasks(templates, {{{"Z", "v"}}}, 0, 1);
        FAIL();
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("tmpl"), std::string::npos) << msg;
        EXPECT_NE(msg.find("X"), std::string::npos) << msg;
    }
    EXPECT_EQ(tasks::placeholders_in("{{A}} and {{B}} and {{A}}"), (std::vector<std::string>{"A", "B"}));
    EXPECT_THROW(tasks::templates_from_json(json::parse(R"({"version":2,"templates":[]})")), DataError);
}

TEST(Tasks, SlotDiscoveryAndJsonl) {
    const auto db = env::synthetic_omics({});
    EXPECT_EQ(tasks::discover_slot_values(db, "cancer_type"), (std::vector<std::string>{"BRCA", "COAD", "KIRC", "LUAD"}));
    test::TempDir dir("tasks");
    const std::vector<env::TaskSpec> ts{{"a", "t", "text a", {{"X", "1"}}}, {"b", "t", "text b", {}}};
    tasks::write_tasks_jsonl(dir / "t.jsonl", ts);
    const auto back = tasks::read_tasks_jsonl(dir / "t.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].placeholders.at("X"), "1");
    test::write_text(dir / "dup.jsonl", R"({"id":"a","text":"x"})" "\n" R"({"id":"a","text":"y"})" "\n");
    EXPECT_THROW(tasks::read_tasks_jsonl(dir / "dup.jsonl"), DataError);
    test::write_text(dir / "empty.jsonl", R"({"id":"a","text":""})" "\n");
    EXPECT_THROW(tasks::read_tasks_jsonl(dir / "empty.jsonl"), DataError);
}

TEST(Config, DefaultsRoundTripAndOverrides) {
    const auto c = config::config_from_json(json::object());
    EXPECT_EQ(c.episode.max_calls, 6);
    EXPECT_EQ(c.inference.k, 5);
    EXPECT_EQ(c.training.grpo.epsilon, 0.2);
    EXPECT_EQ(c.training.grpo.beta, 0.01);
    EXPECT_EQ(config::to_json(config::config_from_json(config::to_json(c))), config::to_json(c));
    const auto o = config::config_from_json(
        json::parse(R"({"inference":{"kappa":0.8},"training":{"schedule":"adapt"},"sandbox":{"command":["python3","w.py"]}})"));
    EXPECT_EQ(o.inference.kappa, 0.8);
    EXPECT_EQ(o.training.schedule, rewards::ScheduleKind::adapt);
    EXPECT_EQ(o.sandbox.command.size(), 2u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    try {
        config::config_from_json(json::parse(R"({"inference":{"kapa":0.8}})"));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("inference.kapa"), std::string::npos) << e.what();
    }
    EXPECT_THROW(config::config_from_json(json::parse(R"({"inference":{"k":1}})")), ConfigError);
    EXPECT_THROW(config::config_from_json(json::parse(R"({"backend":{"kind":"psychic"}})")), ConfigError);
    EXPECT_THROW(config::config_from_json(json::parse(R"({"training":{"schedule":"linear"}})")), ConfigError);
    EXPECT_THROW(config::config_from_json(json::parse(R"({"episode":{"max_calls":"six"}})")), ConfigError);
    test::TempDir dir("cfg");
    test::write_text(dir / "c.json", "{ not json");
    EXPECT_THROW(config::load_config(dir / "c.json"), ConfigError);
}
