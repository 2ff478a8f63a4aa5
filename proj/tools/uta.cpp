// uta: command-line driver for ingestion, episodes, toy training,
// inference and evaluation.

#include "uta/config/run_config.hpp"
#include "uta/environment/database.hpp"
#include "uta/environment/episode.hpp"
#include "uta/environment/synthetic.hpp"
#include "uta/error.hpp"
#include "uta/evaluation/evaluation.hpp"
#include "uta/grpo/toy.hpp"
#include "uta/inference/inference.hpp"
#include "uta/policy/mock.hpp"
#include "uta/policy/remote.hpp"
#include "uta/rewards/remote_judge.hpp"
#include "uta/rng.hpp"
#include "uta/tasks/tasks.hpp"
#include "uta/uncertainty/remote_similarity.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uta;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

config::RunConfig load_run_config(const Globals& g) {
    config::RunConfig c = g.config_path.empty() ? config::RunConfig{} : config::load_config(g.config_path);
    if (g.seed) c.seed = *g.seed;
    if (g.jobs) c.jobs = *g.jobs;
    c.validate();
    return c;
}

env::DatabaseHandle open_db(const std::string& dir, const std::string& descriptors) {
    if (dir.empty()) throw ConfigError("a database directory is required (--db)");
    std::optional<fs::path> desc;
    if (!descriptors.empty()) {
        desc = descriptors;
    } else if (fs::exists(fs::path(dir) / "descriptors.json")) {
        desc = fs::path(dir) / "descriptors.json";
    }
    auto db = env::load_database(dir, desc);
    for (const auto& w : db.warnings()) std::cerr << "warning: " << w << "\n";
    return db;
}

std::shared_ptr<env::CodeExecutor> make_sandbox(const config::RunConfig& c) {
    if (c.sandbox.command.empty()) return nullptr;
    env::SandboxOptions so;
    so.command = c.sandbox.command;
    return std::make_shared<env::SandboxClient>(so);
}

env::EnvironmentOptions env_options(const config::RunConfig& c) {
    env::EnvironmentOptions eo;
    eo.row_limit = c.episode.row_limit;
    eo.code_time_limit_ms = c.sandbox.time_limit_ms;
    eo.code_output_cap_bytes = c.sandbox.output_cap_bytes;
    return eo;
}

std::unique_ptr<policy::Policy> make_policy(const config::RunConfig& c) {
    if (c.backend.kind == "mock") {
        if (c.backend.playbook.empty()) throw ConfigError("mock backend needs a playbook (--playbook)");
        return std::make_unique<policy::MockPolicy>(policy::Playbook::load_jsonl(c.backend.playbook));
    }
    policy::RemotePolicyOptions ro;
    ro.base_url = c.backend.base_url;
    ro.model = c.backend.model;
    ro.temperature = c.backend.temperature;
    ro.top_logprobs = c.backend.top_logprobs;
    ro.max_in_flight = c.backend.max_in_flight;
    ro.max_attempts = c.backend.max_attempts;
    ro.timeout = std::chrono::milliseconds(c.backend.timeout_ms);
    ro.logprob_base = c.backend.logprob_base;
    return std::make_unique<policy::RemotePolicy>(ro);
}

uq::SimilarityFn make_similarity(const config::RunConfig& c) {
    if (c.similarity.kind == "remote") {
        uq::RemoteSimilarityOptions o;
        o.url = c.similarity.url;
        return uq::remote_similarity(o);
    }
    return uq::token_f1;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("expected a comma-separated list of numbers");
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

const env::TaskSpec& find_task(const std::vector<env::TaskSpec>& tasks, const std::string& id) {
    for (const auto& t : tasks) {
        if (t.id == id) return t;
    }
    throw DataError("no task with id '" + id + "'");
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Uncertainty-aware table agent runtime"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Run config (JSON); flags override it")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Base seed");
    app.add_option("--jobs", g.jobs, "Concurrent episodes");

    // ingest
    std::string db_dir, descriptors;
    bool as_json = false;
    auto* ingest = app.add_subcommand("ingest", "Load a CSV directory and print the table manifest");
    ingest->add_option("--db", db_dir, "Directory of CSV files")->required();
    ingest->add_option("--descriptors", descriptors, "Schema descriptor file");
    ingest->add_flag("--json", as_json, "Print the manifest as JSON");

    // split
    std::string split_out;
    std::optional<double> ratio;
    std::optional<std::string> patient_column;
    auto* split = app.add_subcommand("split", "Patient-level train/test split");
    split->add_option("--db", db_dir, "Directory of CSV files")->required();
    split->add_option("--descriptors", descriptors, "Schema descriptor file");
    split->add_option("--out", split_out, "Output directory (train/ and test/ are created)")->required();
    split->add_option("--ratio", ratio, "Train fraction (default 0.7)");
    split->add_option("--patient-column", patient_column, "Patient id column");

    // synth-db
    std::string synth_out;
    int synth_patients = 60;
    auto* synth_db = app.add_subcommand("synth-db", "Write a synthetic multi-omics CSV database");
    synth_db->add_option("--out", synth_out, "Output directory")->required();
    synth_db->add_option("--patients", synth_patients, "Number of patients");

    // tasks
    std::string templates_path, out_train, out_eval, values_csv;
    std::optional<int> eval_percent;
    auto* tasks_cmd = app.add_subcommand("tasks", "Render templates into train/eval task sets");
    tasks_cmd->add_option("--templates", templates_path, "Template file")->required();
    tasks_cmd->add_option("--db", db_dir, "Database to discover slot values from");
    tasks_cmd->add_option("--values", values_csv, "Comma-separated slot values (instead of --db)");
    tasks_cmd->add_option("--out-train", out_train, "Train task JSONL")->required();
    tasks_cmd->add_option("--out-eval", out_eval, "Eval task JSONL")->required();
    tasks_cmd->add_option("--eval-percent", eval_percent, "Held-out percentage (default 20)");

    // synth-playbook
    std::string tasks_path, playbook_out;
    int episodes = 5;
    auto* synth_pb = app.add_subcommand("synth-playbook", "Synthesize a mock playbook for a task set");
    synth_pb->add_option("--db", db_dir, "Database directory")->required();
    synth_pb->add_option("--tasks", tasks_path, "Task JSONL")->required();
    synth_pb->add_option("--out", playbook_out, "Playbook JSONL")->required();
    synth_pb->add_option("--episodes", episodes, "Scripted episodes per task");

    // run-episode
    std::string task_id, backend, playbook, log_path;
    std::optional<int> max_calls;
    int rollout = 0;
    std::vector<std::string> sandbox_cmd;
    auto* run_ep = app.add_subcommand("run-episode", "Run one episode and print the trajectory");
    run_ep->add_option("--db", db_dir, "Database directory")->required();
    run_ep->add_option("--tasks", tasks_path, "Task JSONL")->required();
    run_ep->add_option("--task-id", task_id, "Task to run")->required();
    run_ep->add_option("--backend", backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    run_ep->add_option("--playbook", playbook, "Mock playbook JSONL");
    run_ep->add_option("--rollout", rollout, "Rollout index");
    run_ep->add_option("--max-calls", max_calls, "Tool-call budget");
    run_ep->add_option("--log", log_path, "Append the trajectory to this JSONL file");
    run_ep->add_option("--sandbox", sandbox_cmd, "Code worker command line")->expected(1, -1);

    // train-toy
    std::string schedule, curve_out, checkpoint_out;
    bool all_schedules = false;
    std::optional<double> beta, lr;
    std::optional<int> steps;
    auto* train = app.add_subcommand("train-toy", "GRPO on the built-in toy environment");
    train->add_option("--schedule", schedule, "zero, base, phase, step or adapt");
    train->add_flag("--all-schedules", all_schedules, "Sweep every schedule");
    train->add_option("--out", curve_out, "Curve CSV (a directory with --all-schedules)")->required();
    train->add_option("--checkpoint", checkpoint_out, "Write final toy parameters here");
    train->add_option("--beta", beta, "KL weight");
    train->add_option("--lr", lr, "Learning rate");
    train->add_option("--steps", steps, "Training steps");

    // infer
    std::string report_out;
    std::optional<int> k, repeats;
    std::optional<double> kappa;
    auto* infer_cmd = app.add_subcommand("infer", "K-rollout inference with abstention");
    infer_cmd->add_option("--db", db_dir, "Database directory")->required();
    infer_cmd->add_option("--tasks", tasks_path, "Task JSONL")->required();
    infer_cmd->add_option("--k", k, "Rollouts per task");
    infer_cmd->add_option("--kappa", kappa, "Abstention threshold");
    infer_cmd->add_option("--repeats", repeats, "Repeats per task");
    infer_cmd->add_option("--backend", backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    infer_cmd->add_option("--playbook", playbook, "Mock playbook JSONL");
    infer_cmd->add_option("--max-calls", max_calls, "Tool-call budget");
    infer_cmd->add_option("--out", report_out, "Report JSONL")->required();
    infer_cmd->add_option("--sandbox", sandbox_cmd, "Code worker command line")->expected(1, -1);

    // eval
    std::string report_path, survival_path, curve_csv_out;
    auto* eval_cmd = app.add_subcommand("eval", "Metrics from report files");
    eval_cmd->require_subcommand(1);
    eval_cmd->fallthrough();
    auto* eval_prr = eval_cmd->add_subcommand("prr", "Prediction rejection ratio of u_ret + u_CoCoA");
    eval_prr->add_option("--report", report_path, "Inference report JSONL")->required();
    eval_prr->add_option("--curve-csv", curve_csv_out, "Write rejection curves as CSV");
    auto* eval_cidx = eval_cmd->add_subcommand("cindex", "Harrell's concordance index");
    eval_cidx->add_option("--survival", survival_path, "CSV with id,score,time,event")->required();
    auto* eval_quality = eval_cmd->add_subcommand("quality", "Claim counts and ratios");
    eval_quality->add_option("--report", report_path, "Inference report JSONL")->required();

    // sweep-kappa
    std::string values = "0.2,0.5,0.8";
    auto* sweep = app.add_subcommand("sweep-kappa", "Coverage and quality across thresholds");
    sweep->add_option("--report", report_path, "Inference report JSONL")->required();
    sweep->add_option("--values", values, "Comma-separated kappa values");

    // verify-report
    std::string traj_path;
    auto* verify = app.add_subcommand("verify-report", "Recompute uncertainties from the trajectory log");
    verify->add_option("--report", report_path, "Inference report JSONL")->required();
    verify->add_option("--trajectories", traj_path, "Trajectory JSONL (default <report>.trajectories.jsonl)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    config::RunConfig cfg = load_run_config(g);
    if (!backend.empty()) cfg.backend.kind = backend;
    if (!playbook.empty()) cfg.backend.playbook = playbook;
    if (max_calls) cfg.episode.max_calls = *max_calls;
    if (!sandbox_cmd.empty()) cfg.sandbox.command = sandbox_cmd;
    if (!db_dir.empty()) cfg.database.csv_dir = db_dir;
    if (!descriptors.empty()) cfg.database.descriptors = descriptors;
    cfg.validate();

    if (*ingest) {
        const auto db = open_db(cfg.database.csv_dir, cfg.database.descriptors);
        const auto schema = env::snapshot_schema(db);
        if (as_json) {
            json tables = json::array();
            for (const auto& t : schema) {
                json cols = json::array();
                for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"type", c.type}, {"description", c.description}});
                tables.push_back({{"name", t.name}, {"rows", t.row_count}, {"columns", cols}});
            }
            std::cout << json{{"tables", tables}, {"warnings", db.warnings()}, {"schema_digest", env::schema_digest(db)}}.dump(2)
                      << "\n";
        } else {
            std::cout << schema.size() << " tables\n";
            for (const auto& t : schema) {
                std::cout << "  " << t.name << "  rows=" << t.row_count << "  columns=";
                for (std::size_t i = 0; i < t.columns.size(); ++i) {
                    std::cout << (i ? "," : "") << t.columns[i].name << ":" << t.columns[i].type;
                }
                std::cout << "\n";
            }
        }
        return 0;
    }

    if (*split) {
        const auto db = open_db(cfg.database.csv_dir, cfg.database.descriptors);
        const double r = ratio.value_or(cfg.database.split_ratio);
        if (!(r > 0.0 && r < 1.0)) throw ConfigError("--ratio must lie in (0, 1)");
        const auto res = env::split_dataset(db, r, cfg.seed, patient_column.value_or(cfg.database.patient_column));
        env::write_database_csv(res.train, fs::path(split_out) / "train");
        env::write_database_csv(res.test, fs::path(split_out) / "test");
        std::cout << json{{"train_patients", res.train_patients.size()},
                          {"test_patients", res.test_patients.size()},
                          {"train_dir", (fs::path(split_out) / "train").string()},
                          {"test_dir", (fs::path(split_out) / "test").string()}}
                         .dump()
                  << "\n";
        return 0;
    }

    if (*synth_db) {
        env::SyntheticOmicsOptions so;
        so.patients = synth_patients;
        so.seed = cfg.seed;
        env::write_database_csv(env::synthetic_omics(so), synth_out);
        std::cout << "wrote synthetic database to " << synth_out << "\n";
        return 0;
    }

    if (*tasks_cmd) {
        const auto templates = tasks::load_templates(templates_path);
        std::vector<std::string> vals;
        if (!values_csv.empty()) {
            std::stringstream ss(values_csv);
            for (std::string v; std::getline(ss, v, ',');) vals.push_back(v);
        } else if (!cfg.database.csv_dir.empty()) {
            vals = tasks::discover_slot_values(open_db(cfg.database.csv_dir, cfg.database.descriptors), cfg.tasks.slot_column);
        } else {
            throw ConfigError("tasks needs --values or --db");
        }
        std::vector<tasks::Binding> bindings;
        for (const auto& tmpl : templates) {
            if (tmpl.slots.size() > 1) throw ConfigError("template '" + tmpl.id + "' has several slots; use a binding file");
        }
        std::string slot = "CANCER_TYPE";
        for (const auto& tmpl : templates) {
            if (!tmpl.slots.empty()) slot = tmpl.slots.front();
        }
        for (const auto& v : vals) bindings.push_back({{slot, v}});
        const auto split_tasks = tasks::render_tasks(templates, bindings, eval_percent.value_or(cfg.tasks.eval_percent), cfg.seed);
        tasks::write_tasks_jsonl(out_train, split_tasks.train);
        tasks::write_tasks_jsonl(out_eval, split_tasks.eval);
        std::cout << json{{"train", split_tasks.train.size()}, {"eval", split_tasks.eval.size()}}.dump() << "\n";
        return 0;
    }

    if (*synth_pb) {
        const auto db = open_db(cfg.database.csv_dir, cfg.database.descriptors);
        policy::PlaybookSynthOptions po;
        po.episodes_per_task = episodes;
        po.max_calls = cfg.episode.max_calls;
        po.seed = cfg.seed;
        const auto pb = policy::synthesize_playbook(db, tasks::read_tasks_jsonl(tasks_path), po);
        write_file(playbook_out, pb.to_jsonl());
        std::cout << "wrote " << pb.size() << " scripted episodes to " << playbook_out << "\n";
        return 0;
    }

    if (*run_ep) {
        const auto db = open_db(cfg.database.csv_dir, cfg.database.descriptors);
        const env::Environment environment(db, make_sandbox(cfg), env_options(cfg));
        const auto all_tasks = tasks::read_tasks_jsonl(tasks_path);
        const auto& task = find_task(all_tasks, task_id);
        auto pol = make_policy(cfg);
        env::EpisodeOptions eo;
        eo.max_calls = cfg.episode.max_calls;
        eo.rollout = rollout;
        eo.seed = mix_seed({cfg.seed, fnv1a64(task.id), static_cast<std::uint64_t>(rollout)});
        const auto traj = env::run_episode(task, environment, *pol, eo);
        std::cout << env::to_json(traj).dump(2) << "\n";
        if (!log_path.empty()) {
            std::ofstream out(log_path, std::ios::app | std::ios::binary);
            if (!out) throw DataError("cannot append to " + log_path);
            out << env::to_json(traj).dump() << "\n";
        }
        return 0;
    }

    if (*train) {
        std::vector<rewards::ScheduleKind> kinds;
        if (all_schedules) {
            kinds.assign(std::begin(rewards::kAllSchedules), std::end(rewards::kAllSchedules));
        } else {
            kinds.push_back(schedule.empty() ? cfg.training.schedule : rewards::parse_schedule(schedule));
        }
        for (const auto kind : kinds) {
            grpo::TrainOptions o;
            o.grpo = cfg.training.grpo;
            if (beta) o.grpo.beta = *beta;
            if (lr) o.grpo.learning_rate = *lr;
            if (steps) o.grpo.steps = *steps;
            o.schedule = kind;
            o.reward.confidence = cfg.training.confidence;
            o.reward.vocab_size = cfg.training.vocab_size;
            o.reward.judge_max_retries = cfg.judge.max_retries;
            o.adapt_running_mean = cfg.training.adapt_running_mean;
            o.max_calls = cfg.episode.max_calls;
            o.seed = g.seed.value_or(7);
            o.env.seed = o.seed;
            o.jobs = cfg.jobs;
            auto res = grpo::train_toy(o);
            const fs::path path = all_schedules ? fs::path(curve_out) / (std::string(rewards::to_string(kind)) + ".csv")
                                                : fs::path(curve_out);
            write_file(path, grpo::curve_csv(res.curve));
            if (!checkpoint_out.empty()) {
                const fs::path ck = all_schedules
                                        ? fs::path(checkpoint_out) / (std::string(rewards::to_string(kind)) + ".json")
                                        : fs::path(checkpoint_out);
                if (ck.has_parent_path()) fs::create_directories(ck.parent_path());
                res.policy.save_checkpoint(ck);
            }
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
            const auto& c = res.curve;
            std::cout << rewards::to_string(kind) << ": first reward " << fmt(c.front().mean_reward) << ", final reward "
                      << fmt(c.back().mean_reward) << ", final KL " << fmt(c.back().kl) << " -> " << path.string() << "\n";
        }
        return 0;
    }

    if (*infer_cmd) {
        if (k) cfg.inference.k = *k;
        if (kappa) cfg.inference.kappa = *kappa;
        if (repeats) cfg.inference.repeats = *repeats;
        cfg.validate();
        const auto db = open_db(cfg.database.csv_dir, cfg.database.descriptors);
        const env::Environment environment(db, make_sandbox(cfg), env_options(cfg));
        auto pol = make_policy(cfg);
        infer::InferenceConfig ic;
        ic.k = cfg.inference.k;
        ic.kappa = cfg.inference.kappa;
        ic.max_calls = cfg.episode.max_calls;
        ic.seed = cfg.seed;
        ic.seeds = cfg.inference.seeds;
        ic.repeats = cfg.inference.repeats;
        ic.jobs = cfg.jobs;
        if (fs::path(report_out).has_parent_path()) fs::create_directories(fs::path(report_out).parent_path());
        std::ofstream report(report_out, std::ios::binary);
        std::ofstream trajs(report_out + ".trajectories.jsonl", std::ios::binary);
        if (!report || !trajs) throw DataError("cannot write " + report_out);
        const auto summary = infer::batch_infer(tasks::read_tasks_jsonl(tasks_path), environment, *pol, ic,
                                                {&report, &trajs}, nullptr, make_similarity(cfg));
        std::cout << json{{"records", summary.records}, {"errors", summary.errors}, {"report", report_out},
                          {"aggregate", summary.aggregate}}
                         .dump()
                  << "\n";
        return 0;
    }

    if (*eval_prr) {
        const auto rep = infer::read_report(report_path);
        const auto items = infer::scored_items(rep.records);
        const auto value = eval::prr(items);
        std::cout << json{{"metric", "prr"}, {"items", items.size()}, {"prr", value ? json(*value) : json(nullptr)},
                          {"undefined", !value.has_value()}}
                         .dump()
                  << "\n";
        if (!curve_csv_out.empty() && !items.empty()) {
            const auto cu = eval::rejection_curve(items, eval::Ordering::by_uncertainty);
            const auto co = eval::rejection_curve(items, eval::Ordering::oracle);
            const auto cr = eval::rejection_curve(items, eval::Ordering::random);
            std::ostringstream out;
            out << "rejected,by_uncertainty,oracle,random\n";
            out.precision(10);
            for (std::size_t i = 0; i < cu.size(); ++i) out << i << ',' << cu[i] << ',' << co[i] << ',' << cr[i] << '\n';
            write_file(curve_csv_out, out.str());
        }
        return 0;
    }

    if (*eval_cidx) {
        const auto records = eval::read_survival_csv(survival_path);
        const auto c = eval::c_index(records);
        std::cout << json{{"metric", "c_index"}, {"records", records.size()}, {"c_index", c ? json(*c) : json(nullptr)},
                          {"undefined", !c.has_value()}}
                         .dump()
                  << "\n";
        return 0;
    }

    if (*eval_quality) {
        const auto rep = infer::read_report(report_path);
        std::vector<eval::ClaimRecord> emitted;
        std::vector<eval::ClaimRecord> all;
        for (const auto& r : rep.records) {
            if (!r.contains("claims")) continue;
            for (const auto& c : r["claims"]) {
                all.push_back(eval::claim_from_json(c));
                if (r["decision"] == "emit") emitted.push_back(all.back());
            }
        }
        auto block = [](const std::vector<eval::ClaimRecord>& cl) {
            const auto q = eval::aggregate_quality(cl);
            return json{{"claims", q.claims}, {"correct_ratio", q.correct_ratio}, {"useful_ratio", q.useful_ratio},
                        {"undefined", q.undefined}};
        };
        std::cout << json{{"metric", "quality"}, {"all_candidates", block(all)}, {"emitted", block(emitted)}}.dump() << "\n";
        return 0;
    }

    if (*sweep) {
        const auto rep = infer::read_report(report_path);
        const auto rows = infer::sweep_kappa(rep.records, parse_values(values));
        std::cout << "kappa  records  emitted  coverage  abstention  emitted_quality\n";
        for (const auto& r : rows) {
            std::cout << std::left << std::setw(7) << fmt(r.kappa, 2) << std::setw(9) << r.records << std::setw(9)
                      << r.emitted << std::setw(10) << fmt(r.coverage, 3) << std::setw(12) << fmt(r.abstention_rate, 3)
                      << (r.emitted_quality ? fmt(*r.emitted_quality, 3) : std::string("n/a")) << "\n";
        }
        return 0;
    }

    if (*verify) {
        const std::string tp = traj_path.empty() ? report_path + ".trajectories.jsonl" : traj_path;
        const auto problems = infer::verify_report(report_path, tp, make_similarity(cfg));
        for (const auto& p : problems) std::cout << p << "\n";
        std::cout << json{{"mismatches", problems.size()}}.dump() << "\n";
        if (!problems.empty()) throw DataError(std::to_string(problems.size()) + " records failed recomputation");
        return 0;
    }
    return 0;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
}
