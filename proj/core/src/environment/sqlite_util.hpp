#pragma once

// Private helpers shared by the environment sources.

#include "uta/environment/database.hpp"

#include <sqlite3.h>

#include <memory>
#include <string>
#include <string_view>

namespace uta::env::detail {

struct StmtDeleter {
    void operator()(sqlite3_stmt* s) const noexcept { sqlite3_finalize(s); }
};
using Stmt = std::unique_ptr<sqlite3_stmt, StmtDeleter>;

/// Prepares exactly the first statement; `tail` receives the unparsed rest.
Stmt prepare(sqlite3* db, std::string_view sql, std::string_view* tail = nullptr);

void exec(sqlite3* db, const std::string& sql);

std::string quote_ident(std::string_view name);

Cell column_cell(sqlite3_stmt* stmt, int col);
void bind_cell(sqlite3_stmt* stmt, int index, const Cell& cell);

std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace uta::env::detail
