#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uta::env {

struct CsvRecord {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

/// RFC 4180 reader: comma separator, double-quote quoting with "" escapes,
/// CRLF or LF line ends, optional UTF-8 BOM. Blank lines are skipped.
/// Throws DataError("<source>:<line>: ...") on unterminated quotes, stray
/// quotes inside unquoted fields, or a field count differing from the header.
std::vector<CsvRecord> parse_csv(std::string_view text, const std::string& source_name);

std::vector<CsvRecord> read_csv_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote, or line break.
std::string csv_escape(std::string_view field);

}  // namespace uta::env
