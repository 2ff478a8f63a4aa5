#include "test_support.hpp"

#include "uta/error.hpp"
#include "uta/grpo/objective.hpp"
#include "uta/grpo/toy.hpp"
#include "uta/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace uta;

namespace {

grpo::ToyPolicy small_policy() {
    return grpo::ToyPolicy({"a", "b"}, {"t0", "t1", "t2"}, 3);
}

std::vector<grpo::Decision> random_decisions(Rng& rng, const grpo::ToyPolicy& pol, const std::vector<double>& old_theta,
                                             std::size_t n) {
    std::vector<grpo::Decision> out;
    for (std::size_t i = 0; i < n; ++i) {
        grpo::Decision d;
        d.task = rng.uniform_index(pol.num_tasks());
        d.step = rng.uniform_index(static_cast<std::uint64_t>(pol.max_calls()));
        d.action = rng.uniform_index(pol.num_actions());
        d.old_logprob = std::log(pol.probs(old_theta, d.task, d.step)[d.action]);
        d.advantage = rng.normal();
        d.label = "d" + std::to_string(i);
        out.push_back(d);
    }
    return out;
}

}  // namespace

TEST(Advantages, Examples) {
    const std::vector<double> same{5, 5, 5, 5};
    for (double a : grpo::compute_advantages(same)) EXPECT_EQ(a, 0.0);
    const std::vector<double> two{0, 2};
    const auto a2 = grpo::compute_advantages(two);
    EXPECT_NEAR(a2[0], -1.0, 1e-7);
    EXPECT_NEAR(a2[1], 1.0, 1e-7);
    const std::vector<double> four{1, 2, 3, 4};
    const auto a4 = grpo::compute_advantages(four);
    // Oracle: population standardization.
    const double mean = 2.5, sd = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 4.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a4[i], (four[i] - mean) / (sd + 1e-8), 1e-15);
    EXPECT_NEAR(std::accumulate(a4.begin(), a4.end(), 0.0), 0.0, 1e-12);
    const std::vector<double> one{1};
    EXPECT_THROW(grpo::compute_advantages(one), DomainError);
}

TEST(Advantages, TranslationAndScaleInvariance) {
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> r(4);
        for (auto& v : r) v = 5.0 * rng.uniform01();
        const auto base = grpo::compute_advantages(r);
        auto shifted = r;
        for (auto& v : shifted) v += 17.0;
        auto scaled = r;
        for (auto& v : scaled) v *= 3.0;
        const auto as = grpo::compute_advantages(shifted);
        const auto ac = grpo::compute_advantages(scaled);
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_NEAR(as[k], base[k], 1e-9);
            EXPECT_NEAR(ac[k], base[k], 1e-6);
        }
        EXPECT_LT(std::abs(std::accumulate(base.begin(), base.end(), 0.0)), 1e-9);
    }
}

TEST(Clip, Cases) {
    EXPECT_EQ(grpo::clipped_term(1.0, 2.0, 0.2), 2.0);
    EXPECT_DOUBLE_EQ(grpo::clipped_term(2.0, 1.0, 0.2), 1.2);
    EXPECT_DOUBLE_EQ(grpo::clipped_term(0.5, -1.0, 0.2), -0.8);
    for (double r = 0.8; r <= 1.2; r += 0.01) {
        for (double a : {-2.0, -0.5, 0.3, 4.0}) EXPECT_DOUBLE_EQ(grpo::clipped_term(r, a, 0.2), r * a);
    }
}

TEST(StepLoss, ValuesAndErrors) {
    const std::vector<double> r{1.0}, a{2.0};
    EXPECT_EQ(grpo::grpo_step_loss(r, a, 0.0, 0.2, 0.0), 2.0);
    EXPECT_DOUBLE_EQ(grpo::grpo_step_loss(r, a, 0.5, 0.2, 0.1), 2.0 - 0.05);
    const std::vector<double> bad{1.0, NAN};
    const std::vector<double> a2{1.0, 1.0};
    const std::vector<std::string> labels{"roll-0", "roll-1"};
    try {
        grpo::grpo_step_loss(bad, a2, 0.0, 0.2, 0.0, labels);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("roll-1"), std::string::npos);
    }
}

TEST(Kl, Examples) {
    const std::vector<double> p{0.2, 0.5, 0.3}, q{0.4, 0.4, 0.2};
    double want = 0.0;
    for (int i = 0; i < 3; ++i) want += p[i] * std::log(p[i] / q[i]);
    EXPECT_NEAR(grpo::categorical_kl(p, q), want, 1e-15);
    EXPECT_EQ(grpo::categorical_kl(p, p), 0.0);
    const std::vector<double> uniform(4, 0.25), point{1, 0, 0, 0};
    const double floored = grpo::categorical_kl(uniform, point);
    EXPECT_TRUE(std::isfinite(floored));
    EXPECT_NEAR(floored, 0.75 * std::log(0.25 / 1e-6) + 0.25 * std::log(0.25), 1e-12);
}

TEST(Softmax, Proper) {
    const std::vector<double> logits{1000.0, 999.0, -5.0};
    const auto p = grpo::softmax(logits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
    EXPECT_NEAR(p[0] / p[1], std::exp(1.0), 1e-12);
}

TEST(ToyObjective, GradientMatchesCentralDifferences) {
    auto pol = small_policy();
    Rng rng(31);
    for (int probe = 0; probe < 10; ++probe) {
        std::vector<double> theta(pol.theta().size());
        for (auto& v : theta) v = rng.normal(0.0, 0.7);
        std::vector<double> ref(theta.size());
        for (auto& v : ref) v = rng.normal(0.0, 0.7);
        pol.set_theta(ref);
        pol.freeze_reference();
        std::vector<double> old = theta;
        for (auto& v : old) v += rng.normal(0.0, 0.1);
        const auto decisions = random_decisions(rng, pol, old, 12);
        const auto obj = grpo::toy_objective(pol, theta, decisions, 0.2, 0.3);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double h = 1e-5;
            auto plus = theta, minus = theta;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (grpo::toy_objective(pol, plus, decisions, 0.2, 0.3).value -
                               grpo::toy_objective(pol, minus, decisions, 0.2, 0.3).value) /
                              (2 * h);
            num += (fd - obj.gradient[i]) * (fd - obj.gradient[i]);
            den += fd * fd;
        }
        EXPECT_LT(std::sqrt(num) / std::max(std::sqrt(den), 1e-12), 1e-4) << "probe " << probe;
    }
}

TEST(ToyObjective, ZeroAdvantagesAndBetaGiveZeroGradient) {
    auto pol = small_policy();
    Rng rng(1);
    std::vector<double> theta(pol.theta().size());
    for (auto& v : theta) v = rng.normal();
    auto decisions = random_decisions(rng, pol, theta, 8);
    for (auto& d : decisions) d.advantage = 0.0;
    const auto obj = grpo::toy_objective(pol, theta, decisions, 0.2, 0.0);
    for (double g : obj.gradient) EXPECT_EQ(g, 0.0);
}

TEST(ToyPolicy, ProbabilitiesAndCheckpoint) {
    auto pol = small_policy();
    EXPECT_EQ(pol.num_actions(), 4u);
    EXPECT_EQ(pol.theta().size(), 2u * 3u * 4u);
    const auto p = pol.probs(1, 2);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
    std::vector<double> theta(pol.theta().size());
    std::iota(theta.begin(), theta.end(), -3.0);
    pol.set_theta(theta);
    test::TempDir dir("ckpt");
    pol.save_checkpoint(dir / "p.json");
    const auto back = grpo::ToyPolicy::load_checkpoint(dir / "p.json");
    EXPECT_EQ(back.theta(), pol.theta());
    EXPECT_EQ(back.tables(), pol.tables());
    test::write_text(dir / "bad.json", R"({"format":"something-else"})");
    EXPECT_THROW(grpo::ToyPolicy::load_checkpoint(dir / "bad.json"), DataError);
    EXPECT_THROW(pol.action_index(env::SchemaLookup{"t0"}), DomainError);
}

TEST(ToyEnvironment, Shape) {
    const auto e = grpo::make_toy_environment({});
    EXPECT_EQ(e.db.tables().size(), 10u);
    EXPECT_EQ(e.relevant.size(), 3u);
    EXPECT_EQ(e.tasks.size(), 4u);
    grpo::ToyJudge judge(e.relevant, e.facts_per_table);
    const auto rel = *e.relevant.begin();
    EXPECT_EQ(judge.count_facts(test::committed({rel, "zz"}, "s", {-1})), 5);
    EXPECT_EQ(judge.count_facts(test::uncommitted({rel})), 0);
}

TEST(TrainToy, ZeroLearningRateIsFlat) {
    grpo::TrainOptions o;
    o.grpo.learning_rate = 0.0;
    o.grpo.steps = 5;
    const auto r = grpo::train_toy(o);
    EXPECT_EQ(r.curve.size(), 5u);
    for (double v : r.policy.theta()) EXPECT_EQ(v, 0.0);
    for (const auto& c : r.curve) EXPECT_EQ(c.kl, 0.0);
}

TEST(TrainToy, SeededRunsAreIdentical) {
    grpo::TrainOptions o;
    o.grpo.steps = 8;
    o.schedule = rewards::ScheduleKind::step;
    const auto a = grpo::train_toy(o);
    const auto b = grpo::train_toy(o);
    EXPECT_EQ(grpo::curve_csv(a.curve), grpo::curve_csv(b.curve));
    o.jobs = 3;
    const auto c = grpo::train_toy(o);
    EXPECT_EQ(grpo::curve_csv(a.curve), grpo::curve_csv(c.curve));
    EXPECT_EQ(a.curve[6].alpha_conf, 0.0);  // step 7
    EXPECT_EQ(grpo::curve_csv(a.curve).substr(0, 51), "step,mean_reward,r_code,r_judge,conf_proxy,kl,alpha");
}

TEST(TrainToy, StepScheduleSpikesEveryTenSteps) {
    grpo::TrainOptions o;
    o.grpo.steps = 30;
    o.schedule = rewards::ScheduleKind::step;
    const auto r = grpo::train_toy(o);
    for (const auto& c : r.curve) EXPECT_EQ(c.alpha_conf, c.step % 10 == 0 ? 2.0 : 0.0) << c.step;
}

TEST(TrainToy, ConfigValidation) {
    grpo::GrpoConfig c;
    c.epsilon = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.beta = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.rollouts = 1;
    EXPECT_THROW(c.validate(), ConfigError);
}
