#include "uta/environment/tools.hpp"

#include "sqlite_util.hpp"
#include "uta/error.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <numeric>

namespace uta::env {

using nlohmann::json;

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$'; }

/// Index of the first character after whitespace, comments and '(' / ';'.
std::size_t skip_trivia(std::string_view s, std::size_t i, bool skip_parens) {
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c)) != 0 || c == ';' || (skip_parens && c == '(')) {
            ++i;
        } else if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            const auto end = s.find("*/", i + 2);
            i = end == std::string_view::npos ? s.size() : end + 2;
        } else {
            break;
        }
    }
    return i;
}

json cell_json(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return nullptr;
            } else {
                return v;
            }
        },
        cell);
}

/// Holds the connection mutex so the error message read after a failure
/// belongs to this statement.
class ConnectionLock {
public:
    explicit ConnectionLock(sqlite3* db) : mutex_(sqlite3_db_mutex(db)) { sqlite3_mutex_enter(mutex_); }
    ~ConnectionLock() { sqlite3_mutex_leave(mutex_); }
    ConnectionLock(const ConnectionLock&) = delete;
    ConnectionLock& operator=(const ConnectionLock&) = delete;

private:
    sqlite3_mutex* mutex_;
};

}  // namespace

std::vector<std::string> sql_identifiers(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    auto read_quoted = [&](char close) {
        std::string id;
        ++i;
        while (i < s.size()) {
            if (s[i] == close) {
                if (close != ']' && i + 1 < s.size() && s[i + 1] == close) {
                    id.push_back(close);
                    i += 2;
                    continue;
                }
                ++i;
                break;
            }
            id.push_back(s[i++]);
        }
        return id;
    };
    while (i < s.size()) {
        const char c = s[i];
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            const auto end = s.find("*/", i + 2);
            i = end == std::string_view::npos ? s.size() : end + 2;
        } else if (c == '\'') {
            read_quoted('\'');  // string literal, discarded
        } else if (c == '"') {
            out.push_back(read_quoted('"'));
        } else if (c == '`') {
            out.push_back(read_quoted('`'));
        } else if (c == '[') {
            out.push_back(read_quoted(']'));
        } else if (ident_start(c)) {
            const std::size_t start = i;
            while (i < s.size() && ident_char(s[i])) ++i;
            out.emplace_back(s.substr(start, i - start));
        } else if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
            // Numeric literal, including forms like 1e5 that would otherwise
            // leave an identifier-looking tail.
            while (i < s.size() && (ident_char(s[i]) || s[i] == '.')) ++i;
        } else {
            ++i;
        }
    }
    return out;
}

std::set<std::string> referenced_tables(const DatabaseHandle& db, std::string_view sql) {
    std::set<std::string> out;
    for (const auto& id : sql_identifiers(sql)) {
        if (const TableMeta* t = db.find_table_ci(id)) {
            out.insert(t->name);
        }
    }
    return out;
}

bool is_read_only_statement(std::string_view sql) {
    std::size_t i = skip_trivia(sql, 0, true);
    std::size_t j = i;
    while (j < sql.size() && ident_char(sql[j])) ++j;
    const std::string word = detail::lower(sql.substr(i, j - i));
    return word == "select" || word == "with" || word == "explain";
}

ToolResult execute_sql(const DatabaseHandle& db, std::string_view query, int row_limit) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&](ToolResult r) {
        r.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
        return r;
    };

    if (skip_trivia(query, 0, false) >= query.size()) {
        return finish(ToolResult::failure("empty query"));
    }
    if (!is_read_only_statement(query)) {
        return finish(ToolResult::failure("read-only violation: only SELECT, WITH and EXPLAIN statements are allowed"));
    }

    sqlite3* conn = db.connection();
    ConnectionLock lock(conn);

    sqlite3_stmt* raw = nullptr;
    const char* tail = nullptr;
    if (sqlite3_prepare_v2(conn, query.data(), static_cast<int>(query.size()), &raw, &tail) != SQLITE_OK) {
        sqlite3_finalize(raw);
        return finish(ToolResult::failure(std::string("sql error: ") + sqlite3_errmsg(conn)));
    }
    detail::Stmt stmt(raw);
    if (!stmt) {
        return finish(ToolResult::failure("empty query"));
    }
    const std::string_view rest = tail != nullptr ? std::string_view(tail, static_cast<std::size_t>(query.data() + query.size() - tail))
                                                  : std::string_view{};
    if (skip_trivia(rest, 0, false) < rest.size()) {
        return finish(ToolResult::failure("multiple statements are not allowed"));
    }
    if (sqlite3_stmt_readonly(stmt.get()) == 0) {
        return finish(ToolResult::failure("read-only violation: statement would modify the database"));
    }

    ToolResult r;
    const int ncol = sqlite3_column_count(stmt.get());
    for (int c = 0; c < ncol; ++c) {
        const char* name = sqlite3_column_name(stmt.get(), c);
        r.columns.emplace_back(name != nullptr ? name : "");
    }
    json rows = json::array();
    const auto limit = static_cast<std::size_t>(std::max(0, row_limit));
    for (;;) {
        const int rc = sqlite3_step(stmt.get());
        if (rc == SQLITE_DONE) {
            break;
        }
        if (rc != SQLITE_ROW) {
            return finish(ToolResult::failure(std::string("sql error: ") + sqlite3_errmsg(conn)));
        }
        if (rows.size() >= limit) {
            r.truncated = true;
            break;
        }
        json row = json::array();
        for (int c = 0; c < ncol; ++c) {
            row.push_back(cell_json(detail::column_cell(stmt.get(), c)));
        }
        rows.push_back(std::move(row));
    }
    r.ok = true;
    r.payload = std::move(rows);
    r.tables_touched = referenced_tables(db, query);
    return finish(std::move(r));
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (std::tolower(static_cast<unsigned char>(a[i - 1])) ==
                                                           std::tolower(static_cast<unsigned char>(b[j - 1]))
                                                       ? 0
                                                       : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

ToolResult lookup_schema(const DatabaseHandle& db, std::string_view table) {
    const auto start = std::chrono::steady_clock::now();
    ToolResult r;
    const TableMeta* t = db.find_table(table);
    if (t == nullptr) {
        t = db.find_table_ci(table);
    }
    if (table.empty()) {
        r = ToolResult::failure("table name is empty");
    } else if (t != nullptr) {
        json cols = json::array();
        for (const auto& c : t->columns) {
            cols.push_back(json{{"name", c.name}, {"type", c.type}, {"description", c.description}});
        }
        r.ok = true;
        r.payload = json{{"table", t->name}, {"row_count", t->row_count}, {"columns", std::move(cols)}};
        r.tables_touched.insert(t->name);
    } else {
        std::vector<std::pair<std::size_t, std::string>> ranked;
        for (const auto& meta : db.tables()) {
            ranked.emplace_back(edit_distance(table, meta.name), meta.name);
        }
        std::sort(ranked.begin(), ranked.end());
        json suggestions = json::array();
        std::string list;
        for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) {
            suggestions.push_back(ranked[i].second);
            list += (i ? ", " : "") + ranked[i].second;
        }
        r = ToolResult::failure("unknown table '" + std::string(table) + "'" +
                                (list.empty() ? std::string{} : "; did you mean: " + list));
        r.payload = json{{"suggestions", std::move(suggestions)}};
    }
    r.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
    return r;
}

Environment::Environment(DatabaseHandle db, std::shared_ptr<CodeExecutor> executor, EnvironmentOptions options)
    : db_(std::move(db)), executor_(std::move(executor)), options_(options), schema_digest_(env::schema_digest(db_)) {}

ToolResult Environment::execute(const Action& action, const std::string& request_id) const {
    if (const auto* q = std::get_if<SqlQuery>(&action)) {
        return execute_sql(db_, q->query, options_.row_limit);
    }
    if (const auto* s = std::get_if<SchemaLookup>(&action)) {
        return lookup_schema(db_, s->table);
    }
    if (const auto* c = std::get_if<CodeTool>(&action)) {
        return run_code(*c, request_id);
    }
    throw std::logic_error("Environment::execute called with CommitSummary");
}

ToolResult Environment::run_code(const CodeTool& code, const std::string& request_id) const {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&](ToolResult r) {
        r.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
        return r;
    };
    if (!executor_) {
        return finish(ToolResult::failure("tool-unavailable: no code sandbox configured"));
    }

    ExecRequest req;
    req.id = request_id;
    req.code = code.code;
    req.time_limit_ms = options_.code_time_limit_ms;
    req.output_cap_bytes = options_.code_output_cap_bytes;
    std::set<std::string> exported;
    for (const auto& name : code.tables) {
        const TableMeta* t = db_.find_table_ci(name);
        if (t == nullptr) {
            return finish(ToolResult::failure("unknown table '" + name + "' passed to code tool"));
        }
        json rows = json::array();
        auto stmt = detail::prepare(db_.connection(), "SELECT * FROM " + detail::quote_ident(t->name) +
                                                          " ORDER BY rowid LIMIT " +
                                                          std::to_string(options_.code_table_row_cap));
        while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
            json row = json::object();
            for (std::size_t c = 0; c < t->columns.size(); ++c) {
                row[t->columns[c].name] = cell_json(detail::column_cell(stmt.get(), static_cast<int>(c)));
            }
            rows.push_back(std::move(row));
        }
        req.tables[t->name] = std::move(rows);
        exported.insert(t->name);
    }

    ExecResponse resp;
    try {
        resp = executor_->execute(req);
    } catch (const BackendError& e) {
        return finish(ToolResult::failure(std::string("tool-unavailable: ") + e.what()));
    }
    if (!resp.ok) {
        return finish(ToolResult::failure(resp.error_text.value_or("code execution failed")));
    }
    ToolResult r;
    r.ok = true;
    r.payload = json{{"stdout", resp.stdout_text}, {"value", resp.value}};
    r.tables_touched = std::move(exported);
    return finish(std::move(r));
}

}  // namespace uta::env
