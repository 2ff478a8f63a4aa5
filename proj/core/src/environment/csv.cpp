#include "uta/environment/csv.hpp"

#include "uta/error.hpp"

#include <fstream>
#include <sstream>

namespace uta::env {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
    throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<CsvRecord> parse_csv(std::string_view text, const std::string& source_name) {
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
        text.remove_prefix(3);
    }

    std::vector<CsvRecord> records;
    std::size_t line = 1;
    std::size_t i = 0;
    const std::size_t n = text.size();

    while (i < n) {
        // Skip blank lines between records.
        if (text[i] == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (text[i] == '\r' && i + 1 < n && text[i + 1] == '\n') {
            ++line;
            i += 2;
            continue;
        }

        CsvRecord rec;
        rec.line = line;
        std::string field;
        bool record_done = false;
        while (!record_done) {
            field.clear();
            if (i < n && text[i] == '"') {
                ++i;
                const std::size_t quote_line = line;
                bool closed = false;
                while (i < n) {
                    const char c = text[i];
                    if (c == '"') {
                        if (i + 1 < n && text[i + 1] == '"') {
                            field.push_back('"');
                            i += 2;
                            continue;
                        }
                        ++i;
                        closed = true;
                        break;
                    }
                    if (c == '\n') {
                        ++line;
                    }
                    field.push_back(c);
                    ++i;
                }
                if (!closed) {
                    fail(source_name, quote_line, "unterminated quoted field");
                }
                if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                    fail(source_name, line, "unexpected character after closing quote");
                }
            } else {
                while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                    if (text[i] == '"') {
                        fail(source_name, line, "quote inside unquoted field");
                    }
                    field.push_back(text[i]);
                    ++i;
                }
            }
            rec.fields.push_back(field);

            if (i >= n) {
                record_done = true;
            } else if (text[i] == ',') {
                ++i;
            } else if (text[i] == '\n') {
                ++i;
                ++line;
                record_done = true;
            } else if (text[i] == '\r') {
                if (i + 1 < n && text[i + 1] == '\n') {
                    i += 2;
                } else {
                    ++i;
                }
                ++line;
                record_done = true;
            }
        }
        records.push_back(std::move(rec));
    }

    if (!records.empty()) {
        const std::size_t width = records.front().fields.size();
        for (const auto& rec : records) {
            if (rec.fields.size() != width) {
                fail(source_name, rec.line,
                     "expected " + std::to_string(width) + " fields, found " + std::to_string(rec.fields.size()));
            }
        }
    }
    return records;
}

std::vector<CsvRecord> read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(path.string() + ": cannot open");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.filename().string());
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

}  // namespace uta::env
