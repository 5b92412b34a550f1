#pragma once

#include <string>
#include <vector>

namespace cnf::csv {

/// Parse CSV text. Handles quoted fields with embedded commas, quotes and
/// newlines (RFC 4180 style). Empty trailing line is ignored.
std::vector<std::vector<std::string>> parse(const std::string& text);

/// Read and parse a CSV file. Throws file_not_found / io.
std::vector<std::vector<std::string>> read_file(const std::string& path);

/// Quote a field if needed.
std::string escape(const std::string& field);

/// Join fields into one CSV line (no trailing newline).
std::string join_row(const std::vector<std::string>& fields);

}  // namespace cnf::csv
