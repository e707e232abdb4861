#include "hlchoice/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "hlchoice/error.hpp"

namespace hlchoice::csv {

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, char delim) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(delim);
        out += parts[i];
    }
    return out;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError(file, 1, std::string(name), "missing column in header");
}

namespace {

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool skippable(const std::string& line) {
    return line.empty() || line.front() == '#';
}

}  // namespace

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open required file: " + path.string());
    Table table;
    table.file = path.filename().string();
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (skippable(line)) continue;
        std::vector<std::string> fields;
        for (auto f : split(line, ',')) fields.emplace_back(f);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(table.file, lineno, "<row>",
                             "expected " + std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(fields.size()));
        }
        table.rows.push_back(Row{lineno, std::move(fields)});
    }
    if (!have_header) throw ParseError(table.file, 1, "<header>", "file is empty");
    return table;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open required file: " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        strip_cr(line);
        if (skippable(line)) continue;
        out.push_back(line);
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view text) {
    if (text.empty()) return std::nullopt;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

}  // namespace hlchoice::csv
