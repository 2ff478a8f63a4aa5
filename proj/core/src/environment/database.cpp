#include "uta/environment/database.hpp"

#include "sqlite_util.hpp"
#include "uta/environment/csv.hpp"
#include "uta/error.hpp"
#include "uta/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace uta::env {

namespace detail {

Stmt prepare(sqlite3* db, std::string_view sql, std::string_view* tail) {
    sqlite3_stmt* raw = nullptr;
    const char* rest = nullptr;
    const int rc = sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &raw, &rest);
    Stmt stmt(raw);
    if (rc != SQLITE_OK) {
        throw DataError(std::string("sql: ") + sqlite3_errmsg(db));
    }
    if (tail != nullptr) {
        *tail = rest != nullptr ? std::string_view(rest, static_cast<std::size_t>(sql.data() + sql.size() - rest))
                                : std::string_view{};
    }
    return stmt;
}

void exec(sqlite3* db, const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err != nullptr ? err : "unknown sqlite error";
        sqlite3_free(err);
        throw DataError("sql: " + msg);
    }
}

std::string quote_ident(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

Cell column_cell(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt, col));
        case SQLITE_FLOAT: return sqlite3_column_double(stmt, col);
        case SQLITE_NULL: return std::monostate{};
        default: {
            const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
            const int len = sqlite3_column_bytes(stmt, col);
            return std::string(text != nullptr ? text : "", static_cast<std::size_t>(len));
        }
    }
}

void bind_cell(sqlite3_stmt* stmt, int index, const Cell& cell) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                sqlite3_bind_null(stmt, index);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                sqlite3_bind_int64(stmt, index, v);
            } else if constexpr (std::is_same_v<T, double>) {
                sqlite3_bind_double(stmt, index, v);
            } else {
                sqlite3_bind_text(stmt, index, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
            }
        },
        cell);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

}  // namespace detail

using detail::iequals;
using detail::quote_ident;

namespace {

bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) {
        return false;
    }
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) != 0 || c == '_'; });
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::shared_ptr<sqlite3> open_memory() {
    sqlite3* raw = nullptr;
    const int rc = sqlite3_open_v2(":memory:", &raw, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                                   nullptr);
    std::shared_ptr<sqlite3> conn(raw, [](sqlite3* db) { sqlite3_close_v2(db); });
    if (rc != SQLITE_OK) {
        throw DataError("cannot open in-memory database");
    }
    return conn;
}

}  // namespace

bool TableMeta::has_column(std::string_view column) const {
    return std::any_of(columns.begin(), columns.end(), [&](const ColumnMeta& c) { return iequals(c.name, column); });
}

const char* to_string(SplitTag tag) noexcept {
    switch (tag) {
        case SplitTag::full: return "full";
        case SplitTag::train: return "train";
        case SplitTag::test: return "test";
    }
    return "full";
}

std::string cell_to_string(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return "";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[64];
                const auto res = std::to_chars(buf, buf + sizeof buf, v);
                return std::string(buf, res.ptr);
            } else {
                return v;
            }
        },
        cell);
}

DatabaseHandle::DatabaseHandle() : conn_(open_memory()) {}

const TableMeta* DatabaseHandle::find_table(std::string_view name) const {
    for (const auto& t : tables_) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

const TableMeta* DatabaseHandle::find_table_ci(std::string_view name) const {
    for (const auto& t : tables_) {
        if (iequals(t.name, name)) {
            return &t;
        }
    }
    return nullptr;
}

std::vector<std::vector<Cell>> DatabaseHandle::read_rows(const std::string& table) const {
    if (find_table(table) == nullptr) {
        throw DataError("unknown table: " + table);
    }
    auto stmt = detail::prepare(conn_.get(), "SELECT * FROM " + quote_ident(table) + " ORDER BY rowid");
    std::vector<std::vector<Cell>> rows;
    const int ncol = sqlite3_column_count(stmt.get());
    while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
        std::vector<Cell> row;
        row.reserve(static_cast<std::size_t>(ncol));
        for (int c = 0; c < ncol; ++c) {
            row.push_back(detail::column_cell(stmt.get(), c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

DatabaseBuilder::DatabaseBuilder(SplitTag tag) { db_.split_tag_ = tag; }

void DatabaseBuilder::add_table(TableData data) {
    if (!is_identifier(data.name)) {
        throw DataError("table name is not a plain identifier: '" + data.name + "'");
    }
    if (db_.find_table_ci(data.name) != nullptr) {
        throw DataError("duplicate table name: " + data.name);
    }
    if (data.columns.empty()) {
        throw DataError("table " + data.name + " has no columns");
    }
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        if (data.columns[i].name.empty()) {
            throw DataError("table " + data.name + ": empty column name at position " + std::to_string(i + 1));
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (iequals(data.columns[i].name, data.columns[j].name)) {
                throw DataError("table " + data.name + ": duplicate column name '" + data.columns[i].name + "'");
            }
        }
    }

    sqlite3* conn = db_.conn_.get();
    std::string ddl = "CREATE TABLE " + quote_ident(data.name) + " (";
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        if (i > 0) {
            ddl += ", ";
        }
        ddl += quote_ident(data.columns[i].name) + " " + data.columns[i].type;
    }
    ddl += ")";
    detail::exec(conn, ddl);

    std::string insert = "INSERT INTO " + quote_ident(data.name) + " VALUES (";
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        insert += i == 0 ? "?" : ", ?";
    }
    insert += ")";

    detail::exec(conn, "BEGIN");
    auto stmt = detail::prepare(conn, insert);
    for (const auto& row : data.rows) {
        if (row.size() != data.columns.size()) {
            detail::exec(conn, "ROLLBACK");
            throw DataError("table " + data.name + ": row width mismatch");
        }
        sqlite3_reset(stmt.get());
        for (std::size_t c = 0; c < row.size(); ++c) {
            detail::bind_cell(stmt.get(), static_cast<int>(c + 1), row[c]);
        }
        if (sqlite3_step(stmt.get()) != SQLITE_DONE) {
            const std::string msg = sqlite3_errmsg(conn);
            detail::exec(conn, "ROLLBACK");
            throw DataError("table " + data.name + ": insert failed: " + msg);
        }
    }
    stmt.reset();
    detail::exec(conn, "COMMIT");

    TableMeta meta;
    meta.name = data.name;
    meta.columns = std::move(data.columns);
    meta.row_count = static_cast<std::int64_t>(data.rows.size());
    db_.tables_.push_back(std::move(meta));
}

void DatabaseBuilder::add_warning(std::string warning) { db_.warnings_.push_back(std::move(warning)); }

DatabaseHandle DatabaseBuilder::finish() {
    std::sort(db_.tables_.begin(), db_.tables_.end(),
              [](const TableMeta& a, const TableMeta& b) { return a.name < b.name; });
    DatabaseHandle out = std::move(db_);
    db_ = DatabaseHandle();
    return out;
}

SchemaDescriptors read_descriptors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path.string() + ": cannot open descriptor file");
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": invalid descriptor JSON: " + e.what());
    }
    if (!doc.is_object()) {
        throw DataError(path.string() + ": descriptor root must be an object");
    }
    SchemaDescriptors out;
    for (const auto& [table, cols] : doc.items()) {
        if (!cols.is_object()) {
            throw DataError(path.string() + ": descriptor for table '" + table + "' must be an object");
        }
        for (const auto& [col, desc] : cols.items()) {
            if (!desc.is_string()) {
                throw DataError(path.string() + ": description of " + table + "." + col + " must be a string");
            }
            out[table][col] = desc.get<std::string>();
        }
    }
    return out;
}

namespace {

TableData table_from_csv(const std::filesystem::path& file) {
    auto records = read_csv_file(file);
    const std::string fname = file.filename().string();
    if (records.empty()) {
        throw DataError(fname + ":1: missing header row");
    }
    TableData data;
    data.name = file.stem().string();
    if (!is_identifier(data.name)) {
        throw DataError(fname + ": file stem is not a valid table identifier");
    }
    const auto& header = records.front().fields;
    for (std::size_t i = 0; i < header.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (iequals(header[i], header[j])) {
                throw DataError(fname + ":1: duplicate header name '" + header[i] + "'");
            }
        }
        if (header[i].empty()) {
            throw DataError(fname + ":1: empty header name in column " + std::to_string(i + 1));
        }
    }

    const std::size_t ncol = header.size();
    std::vector<bool> numeric(ncol, true);
    for (std::size_t r = 1; r < records.size(); ++r) {
        for (std::size_t c = 0; c < ncol; ++c) {
            const auto& f = records[r].fields[c];
            if (!f.empty() && numeric[c] && !parse_double(f).has_value()) {
                numeric[c] = false;
            }
        }
    }
    for (std::size_t c = 0; c < ncol; ++c) {
        data.columns.push_back(ColumnMeta{header[c], numeric[c] ? "NUMERIC" : "TEXT", ""});
    }
    data.rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        std::vector<Cell> row;
        row.reserve(ncol);
        for (std::size_t c = 0; c < ncol; ++c) {
            const auto& f = records[r].fields[c];
            if (f.empty()) {
                row.emplace_back(std::monostate{});
            } else if (!numeric[c]) {
                row.emplace_back(f);
            } else if (auto i = parse_int(f)) {
                row.emplace_back(*i);
            } else {
                row.emplace_back(*parse_double(f));
            }
        }
        data.rows.push_back(std::move(row));
    }
    return data;
}

}  // namespace

DatabaseHandle load_database(const std::filesystem::path& csv_dir, const SchemaDescriptors& descriptors) {
    std::error_code ec;
    if (!std::filesystem::is_directory(csv_dir, ec)) {
        throw DataError(csv_dir.string() + ": not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(csv_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    DatabaseBuilder builder;
    std::set<std::string> loaded;
    for (const auto& file : files) {
        TableData data = table_from_csv(file);
        loaded.insert(data.name);
        if (!descriptors.empty()) {
            auto it = descriptors.find(data.name);
            if (it == descriptors.end()) {
                builder.add_warning("table " + data.name + " has no descriptor entry; loaded with empty descriptions");
            } else {
                std::vector<std::string> unknown;
                for (const auto& [col, desc] : it->second) {
                    const bool known = std::any_of(data.columns.begin(), data.columns.end(),
                                                   [&](const ColumnMeta& m) { return m.name == col; });
                    if (!known) {
                        unknown.push_back(col);
                    }
                }
                if (!unknown.empty()) {
                    std::string list;
                    for (const auto& u : unknown) {
                        list += (list.empty() ? "" : ", ") + u;
                    }
                    builder.add_warning("descriptor for table " + data.name + " names unknown columns (" + list +
                                        "); loaded with empty descriptions");
                } else {
                    for (auto& col : data.columns) {
                        if (auto d = it->second.find(col.name); d != it->second.end()) {
                            col.description = d->second;
                        }
                    }
                }
            }
        }
        builder.add_table(std::move(data));
    }
    for (const auto& [table, cols] : descriptors) {
        if (!loaded.contains(table)) {
            builder.add_warning("descriptor names table " + table + " which has no CSV file");
        }
    }
    return builder.finish();
}

DatabaseHandle load_database(const std::filesystem::path& csv_dir,
                             const std::optional<std::filesystem::path>& descriptor_file) {
    return load_database(csv_dir, descriptor_file ? read_descriptors(*descriptor_file) : SchemaDescriptors{});
}

void write_database_csv(const DatabaseHandle& db, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json desc = nlohmann::json::object();
    for (const auto& table : db.tables()) {
        std::ofstream out(dir / (table.name + ".csv"), std::ios::binary);
        if (!out) {
            throw DataError((dir / (table.name + ".csv")).string() + ": cannot write");
        }
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            out << (c ? "," : "") << csv_escape(table.columns[c].name);
            desc[table.name][table.columns[c].name] = table.columns[c].description;
        }
        out << '\n';
        for (const auto& row : db.read_rows(table.name)) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                out << (c ? "," : "") << csv_escape(cell_to_string(row[c]));
            }
            out << '\n';
        }
    }
    std::ofstream d(dir / "descriptors.json");
    d << desc.dump(2) << '\n';
}

std::vector<TableMeta> snapshot_schema(const DatabaseHandle& db) {
    std::vector<TableMeta> out = db.tables();
    std::sort(out.begin(), out.end(), [](const TableMeta& a, const TableMeta& b) { return a.name < b.name; });
    return out;
}

std::string schema_digest(const DatabaseHandle& db) {
    std::string buf;
    for (const auto& t : snapshot_schema(db)) {
        buf += t.name;
        buf += '\x1f';
        buf += std::to_string(t.row_count);
        for (const auto& c : t.columns) {
            buf += '\x1f';
            buf += c.name;
            buf += ':';
            buf += c.type;
        }
        buf += '\x1e';
    }
    return fnv1a_hex(buf);
}

namespace {

std::string patient_key(const Cell& cell) {
    if (std::holds_alternative<std::monostate>(cell)) {
        return std::string("\0NULL", 5);
    }
    return cell_to_string(cell);
}

}  // namespace

SplitResult split_dataset(const DatabaseHandle& db, double ratio, std::uint64_t seed,
                          const std::string& patient_column,
                          const std::optional<std::vector<std::string>>& per_patient_tables) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw DataError("split ratio must lie strictly between 0 and 1");
    }

    std::set<std::string> per_patient;
    if (per_patient_tables) {
        std::vector<std::string> missing;
        for (const auto& name : *per_patient_tables) {
            const TableMeta* t = db.find_table(name);
            if (t == nullptr) {
                throw DataError("split: unknown table " + name);
            }
            if (!t->has_column(patient_column)) {
                missing.push_back(name);
            }
            per_patient.insert(name);
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) {
                list += (list.empty() ? "" : ", ") + m;
            }
            throw DataError("split: patient column '" + patient_column + "' missing from per-patient tables: " + list);
        }
    } else {
        for (const auto& t : db.tables()) {
            if (t.has_column(patient_column)) {
                per_patient.insert(t.name);
            }
        }
        if (per_patient.empty() && !db.tables().empty()) {
            throw DataError("split: no table has patient column '" + patient_column + "'");
        }
    }

    auto column_index = [&](const TableMeta& t) {
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            if (iequals(t.columns[i].name, patient_column)) {
                return i;
            }
        }
        return t.columns.size();
    };

    std::set<std::string> patient_set;
    std::map<std::string, std::vector<std::vector<Cell>>> contents;
    for (const auto& t : db.tables()) {
        contents[t.name] = db.read_rows(t.name);
        if (per_patient.contains(t.name)) {
            const std::size_t idx = column_index(t);
            for (const auto& row : contents[t.name]) {
                patient_set.insert(patient_key(row[idx]));
            }
        }
    }

    std::vector<std::string> patients(patient_set.begin(), patient_set.end());
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(patients));
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(patients.size())));
    std::unordered_set<std::string> train_ids(patients.begin(), patients.begin() + static_cast<std::ptrdiff_t>(n_train));

    DatabaseBuilder train(SplitTag::train);
    DatabaseBuilder test(SplitTag::test);
    for (const auto& t : db.tables()) {
        TableData tr{t.name, t.columns, {}};
        TableData te{t.name, t.columns, {}};
        auto& rows = contents[t.name];
        if (per_patient.contains(t.name)) {
            const std::size_t idx = column_index(t);
            for (auto& row : rows) {
                if (train_ids.contains(patient_key(row[idx]))) {
                    tr.rows.push_back(std::move(row));
                } else {
                    te.rows.push_back(std::move(row));
                }
            }
        } else {
            tr.rows = rows;
            te.rows = std::move(rows);
        }
        train.add_table(std::move(tr));
        test.add_table(std::move(te));
    }

    SplitResult out{train.finish(), test.finish(), {}, {}};
    for (const auto& p : patients) {
        (train_ids.contains(p) ? out.train_patients : out.test_patients).push_back(p);
    }
    std::sort(out.train_patients.begin(), out.train_patients.end());
    std::sort(out.test_patients.begin(), out.test_patients.end());
    return out;
}

std::vector<std::string> distinct_values(const DatabaseHandle& db, const std::string& column) {
    std::set<std::string> values;
    for (const auto& t : db.tables()) {
        if (!t.has_column(column)) {
            continue;
        }
        auto stmt = detail::prepare(db.connection(), "SELECT DISTINCT " + quote_ident(column) + " FROM " +
                                                         quote_ident(t.name) + " WHERE " + quote_ident(column) +
                                                         " IS NOT NULL");
        while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
            values.insert(cell_to_string(detail::column_cell(stmt.get(), 0)));
        }
    }
    return {values.begin(), values.end()};
}

}  // namespace uta::env
