#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hlchoice::csv {

std::vector<std::string_view> split(std::string_view line, char delim);

std::string join(const std::vector<std::string>& parts, char delim);

/// One data line of a delimited file, with its 1-based line number.
struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// A parsed comma-delimited file with a mandatory header line.
struct Table {
    std::string file;
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Index of `column`; throws ParseError naming the header line when absent.
    std::size_t column(std::string_view name) const;
};

/// Reads `path`. Lines starting with '#' and blank lines are skipped. Every data
/// line must have as many fields as the header; a mismatch raises ParseError.
Table read_table(const std::filesystem::path& path);

/// Reads a one-token-per-line text file ('#' comments and blank lines skipped).
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Shortest text that is guaranteed to round-trip: 17 significant digits.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

}  // namespace hlchoice::csv
