#pragma once

#include "uta/environment/database.hpp"
#include "uta/environment/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace uta::tasks {

struct TaskTemplate {
    std::string id;
    std::vector<std::string> slots;  // declared placeholders
    std::string body;
    std::vector<std::string> objectives;
};

/// Reads {"version": 1, "templates": [...]}. Throws DataError when a body or
/// objective uses an undeclared placeholder.
std::vector<TaskTemplate> load_templates(const std::filesystem::path& path);
std::vector<TaskTemplate> templates_from_json(const nlohmann::json& j);

/// Placeholder names used in text, in order of first use.
std::vector<std::string> placeholders_in(std::string_view text);

/// Substitutes {{slot}} occurrences. Throws DataError naming the template
/// and slot when a value is missing.
std::string render_text(const TaskTemplate& tmpl, std::string_view text,
                        const std::map<std::string, std::string>& values);

using Binding = std::map<std::string, std::string>;

struct TaskSplit {
    std::vector<env::TaskSpec> train;
    std::vector<env::TaskSpec> eval;
};

/// Renders every template once per binding, then holds out
/// floor(n * eval_percent / 100) tasks for evaluation by seeded shuffle.
/// Both halves keep rendering order.
TaskSplit render_tasks(const std::vector<TaskTemplate>& templates, const std::vector<Binding>& bindings,
                       int eval_percent, std::uint64_t seed);

/// Distinct non-null values of `column` over every table that has it, sorted.
std::vector<std::string> discover_slot_values(const env::DatabaseHandle& db, const std::string& column);

std::vector<env::TaskSpec> read_tasks_jsonl(const std::filesystem::path& path);
void write_tasks_jsonl(const std::filesystem::path& path, const std::vector<env::TaskSpec>& tasks);

}  // namespace uta::tasks
