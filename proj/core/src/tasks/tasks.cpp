#include "uta/tasks/tasks.hpp"

#include "uta/error.hpp"
#include "uta/rng.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace uta::tasks {

using nlohmann::json;

std::vector<std::string> placeholders_in(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string_view::npos) {
        const auto end = text.find("}}", pos + 2);
        if (end == std::string_view::npos) {
            throw DataError("unterminated placeholder in '" + std::string(text) + "'");
        }
        std::string name(text.substr(pos + 2, end - pos - 2));
        if (std::find(out.begin(), out.end(), name) == out.end()) {
            out.push_back(std::move(name));
        }
        pos = end + 2;
    }
    return out;
}

std::vector<TaskTemplate> templates_from_json(const json& j) {
    if (!j.is_object() || j.value("version", 0) != 1 || !j.contains("templates") || !j["templates"].is_array()) {
        throw DataError("template file must be {\"version\": 1, \"templates\": [...]}");
    }
    std::vector<TaskTemplate> out;
    std::set<std::string> ids;
    for (const auto& t : j["templates"]) {
        TaskTemplate tmpl;
        try {
            tmpl.id = t.at("id").get<std::string>();
            tmpl.slots = t.value("slots", std::vector<std::string>{});
            tmpl.body = t.at("body").get<std::string>();
            tmpl.objectives = t.value("objectives", std::vector<std::string>{});
        } catch (const json::exception& e) {
            throw DataError(std::string("malformed template: ") + e.what());
        }
        if (!ids.insert(tmpl.id).second) {
            throw DataError("duplicate template id '" + tmpl.id + "'");
        }
        std::vector<std::string> texts{tmpl.body};
        texts.insert(texts.end(), tmpl.objectives.begin(), tmpl.objectives.end());
        for (const auto& text : texts) {
            for (const auto& p : placeholders_in(text)) {
                if (std::find(tmpl.slots.begin(), tmpl.slots.end(), p) == tmpl.slots.end()) {
                    throw DataError("template '" + tmpl.id + "' uses undeclared placeholder '" + p + "'");
                }
            }
        }
        out.push_back(std::move(tmpl));
    }
    return out;
}

std::vector<TaskTemplate> load_templates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open template file " + path.string());
    }
    try {
        return templates_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string render_text(const TaskTemplate& tmpl, std::string_view text, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    for (;;) {
        const auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) {
            throw DataError("template '" + tmpl.id + "': unterminated placeholder");
        }
        out.append(text.substr(pos, open - pos));
        const std::string slot(text.substr(open + 2, close - open - 2));
        const auto it = values.find(slot);
        if (it == values.end()) {
            throw DataError("template '" + tmpl.id + "': no value for slot '" + slot + "'");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

TaskSplit render_tasks(const std::vector<TaskTemplate>& templates, const std::vector<Binding>& bindings,
                       int eval_percent, std::uint64_t seed) {
    if (eval_percent < 0 || eval_percent > 100) {
        throw ConfigError("eval_percent must be within [0, 100]");
    }
    std::vector<env::TaskSpec> all;
    for (const auto& tmpl : templates) {
        for (std::size_t b = 0; b < bindings.size(); ++b) {
            env::TaskSpec spec;
            char idx[16];
            std::snprintf(idx, sizeof idx, "%03zu", b);
            spec.id = tmpl.id + "-" + idx;
            spec.template_id = tmpl.id;
            for (const auto& slot : tmpl.slots) {
                const auto it = bindings[b].find(slot);
                if (it == bindings[b].end()) {
                    throw DataError("template '" + tmpl.id + "': no value for slot '" + slot + "'");
                }
                spec.placeholders[slot] = it->second;
            }
            std::ostringstream text;
            text << render_text(tmpl, tmpl.body, spec.placeholders);
            for (std::size_t k = 0; k < tmpl.objectives.size(); ++k) {
                text << "\n" << (k + 1) << ". " << render_text(tmpl, tmpl.objectives[k], spec.placeholders);
            }
            spec.text = text.str();
            all.push_back(std::move(spec));
        }
    }

    const std::size_t n = all.size();
    const std::size_t n_eval = n * static_cast<std::size_t>(eval_percent) / 100;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> is_eval(n, false);
    for (std::size_t i = 0; i < n_eval; ++i) is_eval[order[i]] = true;

    TaskSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        (is_eval[i] ? split.eval : split.train).push_back(std::move(all[i]));
    }
    return split;
}

std::vector<std::string> discover_slot_values(const env::DatabaseHandle& db, const std::string& column) {
    return env::distinct_values(db, column);
}

std::vector<env::TaskSpec> read_tasks_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open task file " + path.string());
    }
    std::vector<env::TaskSpec> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto spec = env::task_from_json(json::parse(line));
            if (spec.text.empty()) throw DataError("task text is empty");
            if (!ids.insert(spec.id).second) throw DataError("duplicate task id '" + spec.id + "'");
            out.push_back(std::move(spec));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_tasks_jsonl(const std::filesystem::path& path, const std::vector<env::TaskSpec>& tasks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    for (const auto& t : tasks) {
        out << env::to_json(t).dump() << "\n";
    }
}

}  // namespace uta::tasks
