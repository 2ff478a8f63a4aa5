#include "uta/inference/inference.hpp"

#include "uta/environment/episode.hpp"
#include "uta/error.hpp"
#include "uta/parallel.hpp"
#include "uta/rng.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

namespace uta::infer {

using nlohmann::json;

void InferenceConfig::validate() const {
    if (k < 2) throw ConfigError("k must be >= 2");
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
    if (max_calls < 1) throw ConfigError("max_calls must be >= 1");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (!seeds.empty() && seeds.size() != static_cast<std::size_t>(k)) {
        throw ConfigError("seeds must list exactly k values");
    }
}

std::uint64_t rollout_seed(const InferenceConfig& cfg, const std::string& task_id, int repeat, int k) {
    const std::uint64_t base = cfg.seeds.empty() ? cfg.seed : cfg.seeds[static_cast<std::size_t>(k)];
    return mix_seed({base, fnv1a64(task_id), static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(k)});
}

FilterDecision filter(const uq::UncertaintyReport& report, double kappa) {
    FilterDecision d;
    d.threshold = 2.0 * kappa;
    d.u_ret = report.u_ret;
    d.u_cocoa = report.u_cocoa;
    if (!report.star_index || !report.u_cocoa) {
        d.reason = "no-summary";
        return d;
    }
    if (report.u_ret + *report.u_cocoa > d.threshold) {
        d.reason = "threshold";
        return d;
    }
    d.emit = true;
    d.reason = "emit";
    d.index = report.star_index;
    d.u_perp = report.u_perp[*report.star_index];
    return d;
}

InferenceResult infer(const env::TaskSpec& task, const env::Environment& environment, policy::Policy& policy,
                      const InferenceConfig& cfg, int repeat, const uq::SimilarityFn& sim) {
    cfg.validate();
    InferenceResult out;
    for (int k = 0; k < cfg.k; ++k) {
        env::EpisodeOptions eo;
        eo.max_calls = cfg.max_calls;
        eo.seed = rollout_seed(cfg, task.id, repeat, k);
        eo.rollout = k;
        eo.trajectory_id = task.id + "/r" + std::to_string(repeat) + "/k" + std::to_string(k);
        out.trajectories.push_back(env::run_episode(task, environment, policy, eo));
    }
    out.report = uq::compute_report(out.trajectories, sim);
    return out;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Unit {
    json record;
    std::vector<env::Trajectory> trajectories;
    bool error = false;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (const double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json aggregate_block(const std::vector<Unit>& units, int repeats) {
    // metric -> repeat -> values
    std::map<std::string, std::map<int, std::vector<double>>> per_repeat;
    std::size_t records = 0;
    std::size_t errors = 0;
    for (const auto& u : units) {
        if (u.error) {
            ++errors;
            continue;
        }
        ++records;
        const json& r = u.record;
        const int rep = r["repeat"].get<int>();
        per_repeat["abstention_rate"][rep].push_back(r["decision"] == "abstain" ? 1.0 : 0.0);
        per_repeat["u_ret"][rep].push_back(r["u_ret"].get<double>());
        if (!r["u_cocoa"].is_null()) per_repeat["u_cocoa"][rep].push_back(r["u_cocoa"].get<double>());
        if (r.contains("quality") && !r["quality"]["undefined"].get<bool>()) {
            per_repeat["claims"][rep].push_back(r["quality"]["claims"].get<double>());
            per_repeat["correct_ratio"][rep].push_back(r["quality"]["correct_ratio"].get<double>());
            per_repeat["useful_ratio"][rep].push_back(r["quality"]["useful_ratio"].get<double>());
        }
    }
    json metrics = json::object();
    for (const auto& [name, reps] : per_repeat) {
        std::vector<double> all;
        std::vector<double> means;
        for (const auto& [rep, vals] : reps) {
            all.insert(all.end(), vals.begin(), vals.end());
            means.push_back(mean_of(vals));
        }
        metrics[name] = json{{"mean", mean_of(all)}, {"std", sd_of(means)}, {"n", all.size()}};
    }
    return json{{"schema", kAggregateSchema},
                {"records", records},
                {"errors", errors},
                {"repeats", repeats},
                {"metrics", metrics}};
}

}  // namespace

BatchSummary batch_infer(const std::vector<env::TaskSpec>& tasks, const env::Environment& environment,
                         policy::Policy& policy, const InferenceConfig& cfg, const BatchOutputs& outputs,
                         const ClaimFn& claims, const uq::SimilarityFn& sim) {
    cfg.validate();
    ClaimFn claim_fn = claims;
    if (!claim_fn) {
        const env::DatabaseHandle db = environment.database();
        claim_fn = [db](const env::Trajectory& t) {
            return t.summary ? eval::mock_claims(db, t.summary->text, t.tables_touched())
                             : std::vector<eval::ClaimRecord>{};
        };
    }

    const std::size_t n_units = tasks.size() * static_cast<std::size_t>(cfg.repeats);
    std::vector<Unit> units(n_units);
    parallel_for(n_units, cfg.jobs, [&](std::size_t i) {
        const auto& task = tasks[i / static_cast<std::size_t>(cfg.repeats)];
        const int repeat = static_cast<int>(i % static_cast<std::size_t>(cfg.repeats));
        Unit& u = units[i];
        json rec{{"schema", kRecordSchema}, {"task_id", task.id}, {"repeat", repeat}, {"kappa", cfg.kappa}};
        try {
            auto res = infer(task, environment, policy, cfg, repeat, sim);
            const auto d = filter(res.report, cfg.kappa);
            rec["decision"] = d.emit ? "emit" : "abstain";
            rec["reason"] = d.reason;
            rec["threshold"] = d.threshold;
            rec["summary"] = d.emit ? json(res.trajectories[*d.index].summary->text) : json(nullptr);
            rec["trajectory_id"] = d.emit ? json(res.trajectories[*d.index].trajectory_id) : json(nullptr);
            rec["u_perp"] = opt(d.u_perp);
            rec["u_cocoa"] = opt(res.report.u_cocoa);
            rec["u_ret"] = res.report.u_ret;
            rec["uncertainty"] = uq::to_json(res.report);
            json ids = json::array();
            for (const auto& t : res.trajectories) ids.push_back(t.trajectory_id);
            rec["trajectory_ids"] = ids;
            if (res.report.star_index) {
                const auto cl = claim_fn(res.trajectories[*res.report.star_index]);
                json cj = json::array();
                for (const auto& c : cl) cj.push_back(eval::to_json(c));
                rec["claims"] = cj;
                const auto q = eval::aggregate_quality(cl);
                rec["quality"] = json{{"claims", q.claims},
                                      {"correct_ratio", q.correct_ratio},
                                      {"useful_ratio", q.useful_ratio},
                                      {"undefined", q.undefined}};
            }
            u.trajectories = std::move(res.trajectories);
        } catch (const Error& e) {
            rec["decision"] = "error";
            rec["reason"] = e.what();
            rec["error_kind"] = to_string(e.kind());
            u.error = true;
        }
        u.record = std::move(rec);
    });

    BatchSummary summary;
    for (const auto& u : units) {
        if (outputs.report != nullptr) *outputs.report << u.record.dump() << "\n";
        if (outputs.trajectories != nullptr) {
            for (const auto& t : u.trajectories) *outputs.trajectories << env::to_json(t).dump() << "\n";
        }
        ++summary.records;
        summary.errors += u.error ? 1 : 0;
    }
    summary.aggregate = aggregate_block(units, cfg.repeats);
    if (outputs.report != nullptr) {
        *outputs.report << summary.aggregate.dump() << "\n";
        outputs.report->flush();
    }
    return summary;
}

ReportFile read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report " + path.string());
    ReportFile out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        const std::string schema = j.value("schema", "");
        if (schema == kAggregateSchema) {
            out.aggregate = std::move(j);
        } else if (schema == kRecordSchema) {
            out.records.push_back(std::move(j));
        } else {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown record schema '" + schema + "'");
        }
    }
    return out;
}

std::vector<SweepRow> sweep_kappa(const std::vector<json>& records, const std::vector<double>& kappas) {
    std::vector<SweepRow> rows;
    for (const double kappa : kappas) {
        if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
        SweepRow row;
        row.kappa = kappa;
        double q_sum = 0.0;
        std::size_t q_n = 0;
        for (const auto& r : records) {
            if (r.value("decision", "") == "error") continue;
            ++row.records;
            const auto d = filter(uq::uncertainty_from_json(r.at("uncertainty")), kappa);
            if (!d.emit) continue;
            ++row.emitted;
            if (r.contains("quality") && !r["quality"]["undefined"].get<bool>()) {
                q_sum += r["quality"]["correct_ratio"].get<double>();
                ++q_n;
            }
        }
        if (row.records > 0) {
            row.coverage = static_cast<double>(row.emitted) / static_cast<double>(row.records);
            row.abstention_rate = 1.0 - row.coverage;
        }
        if (q_n > 0) row.emitted_quality = q_sum / static_cast<double>(q_n);
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::string> verify_report(const std::filesystem::path& report, const std::filesystem::path& trajectories,
                                       const uq::SimilarityFn& sim) {
    std::map<std::string, env::Trajectory> by_id;
    {
        std::ifstream in(trajectories);
        if (!in) throw DataError("cannot open trajectories " + trajectories.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto t = env::trajectory_from_json(json::parse(line));
            by_id[t.trajectory_id] = std::move(t);
        }
    }
    std::vector<std::string> problems;
    for (const auto& rec : read_report(report).records) {
        if (rec.value("decision", "") == "error") continue;
        const std::string who = rec["task_id"].get<std::string>() + " repeat " + std::to_string(rec["repeat"].get<int>());
        std::vector<env::Trajectory> trajs;
        bool missing = false;
        for (const auto& id : rec.at("trajectory_ids")) {
            const auto it = by_id.find(id.get<std::string>());
            if (it == by_id.end()) {
                problems.push_back(who + ": trajectory " + id.get<std::string>() + " missing from sidecar");
                missing = true;
                break;
            }
            trajs.push_back(it->second);
        }
        if (missing) continue;
        const json recomputed = uq::to_json(uq::compute_report(trajs, sim));
        if (recomputed != rec.at("uncertainty")) {
            problems.push_back(who + ": uncertainty differs (logged " + rec["uncertainty"].dump() + ", recomputed " +
                               recomputed.dump() + ")");
        }
        const auto d = filter(uq::uncertainty_from_json(recomputed), rec.at("kappa").get<double>());
        if ((d.emit ? "emit" : "abstain") != rec.at("decision").get<std::string>()) {
            problems.push_back(who + ": decision differs on recomputation");
        }
    }
    return problems;
}

std::vector<eval::ScoredItem> scored_items(const std::vector<json>& records) {
    std::vector<eval::ScoredItem> items;
    for (const auto& r : records) {
        if (r.value("decision", "") == "error") continue;
        if (!r.contains("quality") || r["quality"]["undefined"].get<bool>()) continue;
        if (r["u_cocoa"].is_null()) continue;
        items.push_back({r["u_ret"].get<double>() + r["u_cocoa"].get<double>(), r["quality"]["correct_ratio"].get<double>()});
    }
    return items;
}

}  // namespace uta::infer
