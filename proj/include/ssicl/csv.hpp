#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace ssicl {

using CsvRow = std::vector<std::string>;

/// Reads RFC-4180 records: comma separated, double-quoted fields may hold
/// commas, quotes ("") and line breaks; CRLF and LF both end a record.
/// Unbalanced quotes raise a parse error naming the record.
std::vector<CsvRow> read_csv_records(std::istream& in);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

/// Joins fields with commas, escaping each, and appends "\n".
std::string csv_line(const CsvRow& fields);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses the whole of `text` as a double; false on any leftover characters.
bool parse_double(std::string_view text, double& value);

}  // namespace ssicl
