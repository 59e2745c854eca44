#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace traitpipe::csv {

using Row = std::vector<std::string>;

/// Parses one CSV line. Supports double-quoted fields with "" escapes;
/// trailing \r is stripped.
[[nodiscard]] Row parse_line(const std::string& line);

/// Reads all rows from a stream. Blank lines are skipped.
[[nodiscard]] std::vector<Row> read_all(std::istream& in);

/// Reads all rows from a file. Throws SchemaError if the file cannot be
/// opened or is empty.
[[nodiscard]] std::vector<Row> read_file(const std::string& path);

/// Quotes a field if it contains a comma, quote, or newline.
[[nodiscard]] std::string escape_field(const std::string& field);

/// Writes one row, terminated by '\n'.
void write_row(std::ostream& out, const Row& row);

/// Formats a double with enough digits to round-trip exactly.
[[nodiscard]] std::string format_double(double v);

}  // namespace traitpipe::csv
