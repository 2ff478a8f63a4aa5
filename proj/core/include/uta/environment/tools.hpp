#pragma once

#include "uta/environment/database.hpp"
#include "uta/environment/sandbox.hpp"
#include "uta/environment/trajectory.hpp"

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace uta::env {

inline constexpr int kDefaultRowLimit = 50;

/// Identifier tokens of a SQL text, skipping string literals and comments.
/// Quoted identifiers ("x", `x`, [x]) are returned unquoted.
std::vector<std::string> sql_identifiers(std::string_view sql);

/// Known table names referenced by `sql`, matched case-insensitively and
/// returned with their catalogue spelling.
std::set<std::string> referenced_tables(const DatabaseHandle& db, std::string_view sql);

/// True when the first keyword is SELECT, WITH or EXPLAIN.
bool is_read_only_statement(std::string_view sql);

/// Runs one read-only statement. At most row_limit rows are returned; the
/// payload is an array of row arrays and `truncated` marks a cut.
ToolResult execute_sql(const DatabaseHandle& db, std::string_view query, int row_limit = kDefaultRowLimit);

/// Columns, declared types and descriptions of one table. Unknown tables
/// fail with up to three nearest names as suggestions.
ToolResult lookup_schema(const DatabaseHandle& db, std::string_view table);

/// Levenshtein distance, used for schema suggestions.
std::size_t edit_distance(std::string_view a, std::string_view b);

struct EnvironmentOptions {
    int row_limit = kDefaultRowLimit;
    /// Rows exported per table to the code tool.
    int code_table_row_cap = 10000;
    std::int64_t code_time_limit_ms = 2000;
    std::int64_t code_output_cap_bytes = 65536;
};

/// The database plus the tool implementations an episode dispatches to.
/// `executor` may be null, in which case code actions fail with
/// "tool-unavailable".
class Environment {
public:
    Environment(DatabaseHandle db, std::shared_ptr<CodeExecutor> executor = nullptr, EnvironmentOptions options = {});

    const DatabaseHandle& database() const noexcept { return db_; }
    const EnvironmentOptions& options() const noexcept { return options_; }
    const std::string& schema_digest() const noexcept { return schema_digest_; }

    /// Executes a non-commit action.
    ToolResult execute(const Action& action, const std::string& request_id) const;

private:
    ToolResult run_code(const CodeTool& code, const std::string& request_id) const;

    DatabaseHandle db_;
    std::shared_ptr<CodeExecutor> executor_;
    EnvironmentOptions options_;
    std::string schema_digest_;
};

}  // namespace uta::env
