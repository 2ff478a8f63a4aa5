#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

struct sqlite3;

namespace uta::env {

struct ColumnMeta {
    std::string name;
    std::string type;  // "NUMERIC" or "TEXT"
    std::string description;
};

struct TableMeta {
    std::string name;
    std::vector<ColumnMeta> columns;
    std::int64_t row_count = 0;

    bool has_column(std::string_view column) const;
};

enum class SplitTag { full, train, test };
const char* to_string(SplitTag tag) noexcept;

/// A single cell; monostate is SQL NULL.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

/// In-memory table contents used to populate a database.
struct TableData {
    std::string name;
    std::vector<ColumnMeta> columns;
    std::vector<std::vector<Cell>> rows;
};

/// Embedded relational store plus its table catalogue.
///
/// Copies share the underlying connection. The connection is opened in
/// serialized mode, so concurrent read-only use from several threads is safe.
class DatabaseHandle {
public:
    DatabaseHandle();  // empty database, split tag "full"

    const std::vector<TableMeta>& tables() const noexcept { return tables_; }
    const TableMeta* find_table(std::string_view name) const;  // exact match
    const TableMeta* find_table_ci(std::string_view name) const;  // case-insensitive
    SplitTag split_tag() const noexcept { return split_tag_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    sqlite3* connection() const noexcept { return conn_.get(); }

    /// Every row of a table, in insertion order.
    std::vector<std::vector<Cell>> read_rows(const std::string& table) const;

private:
    friend class DatabaseBuilder;

    std::shared_ptr<sqlite3> conn_;
    std::vector<TableMeta> tables_;
    SplitTag split_tag_ = SplitTag::full;
    std::vector<std::string> warnings_;
};

/// Creates tables and rows on a fresh in-memory connection.
class DatabaseBuilder {
public:
    explicit DatabaseBuilder(SplitTag tag = SplitTag::full);

    /// Throws DataError on duplicate table or column names, or on an
    /// identifier the SQL tokenizer could not match later.
    void add_table(TableData data);
    void add_warning(std::string warning);
    DatabaseHandle finish();

private:
    DatabaseHandle db_;
};

/// table -> column -> description
using SchemaDescriptors = std::map<std::string, std::map<std::string, std::string>>;

/// Reads a descriptor file of the form {"table": {"column": "description"}}.
SchemaDescriptors read_descriptors(const std::filesystem::path& path);

/// Loads every *.csv in csv_dir (sorted by file name) as one table named
/// after the file stem. Column types: NUMERIC when every non-empty cell
/// parses as a number, TEXT otherwise; empty cells become NULL.
DatabaseHandle load_database(const std::filesystem::path& csv_dir, const SchemaDescriptors& descriptors = {});

/// load_database with descriptors read from `descriptor_file` when given.
DatabaseHandle load_database(const std::filesystem::path& csv_dir,
                             const std::optional<std::filesystem::path>& descriptor_file);

/// Writes each table back as <dir>/<table>.csv plus descriptors.json.
void write_database_csv(const DatabaseHandle& db, const std::filesystem::path& dir);

/// Tables sorted by name.
std::vector<TableMeta> snapshot_schema(const DatabaseHandle& db);

/// Stable digest over the sorted schema (names, columns, types, row counts).
std::string schema_digest(const DatabaseHandle& db);

struct SplitResult {
    DatabaseHandle train;
    DatabaseHandle test;
    std::vector<std::string> train_patients;
    std::vector<std::string> test_patients;
};

/// Seeded patient-level split. Per-patient tables are `per_patient_tables`
/// when given, otherwise every table containing `patient_column`; the rest
/// are copied to both sides unchanged.
SplitResult split_dataset(const DatabaseHandle& db, double ratio, std::uint64_t seed,
                          const std::string& patient_column,
                          const std::optional<std::vector<std::string>>& per_patient_tables = std::nullopt);

/// Distinct non-null values of `column` across all tables that have it, sorted.
std::vector<std::string> distinct_values(const DatabaseHandle& db, const std::string& column);

std::string cell_to_string(const Cell& cell);

}  // namespace uta::env
