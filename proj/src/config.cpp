#include "hlchoice/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hlchoice/csv.hpp"
#include "hlchoice/error.hpp"
#include "hlchoice/rng.hpp"

namespace hlchoice {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_assignment(std::string_view line, std::string_view where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError(std::string(where) + ": expected key=value, found '" + std::string(line) + "'");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(std::string(where) + ": empty key");
    return {std::string(key), std::string(trim(line.substr(eq + 1)))};
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view origin) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        const auto line = trim(raw);
        if (!line.empty() && line.front() != '#') {
            auto [k, v] = split_assignment(line, std::string(origin) + ":" + std::to_string(line_no));
            cfg.values_[std::move(k)] = std::move(v);
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void KeyValueConfig::apply_override(std::string_view assignment) {
    auto [k, v] = split_assignment(trim(assignment), "override");
    values_[std::move(k)] = std::move(v);
}

std::optional<std::string> KeyValueConfig::find(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string_view fallback) const {
    auto v = find(key);
    return v ? *v : std::string(fallback);
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    auto d = csv::parse_double(*v);
    if (!d) throw ConfigError("config key '" + std::string(key) + "' expects a number, found '" + *v + "'");
    return *d;
}

long long KeyValueConfig::get_int(std::string_view key, long long fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    auto i = csv::parse_int(*v);
    if (!i) throw ConfigError("config key '" + std::string(key) + "' expects an integer, found '" + *v + "'");
    return *i;
}

std::uint64_t KeyValueConfig::get_u64(std::string_view key, std::uint64_t fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto* end = v->data() + v->size();
    auto [p, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc{} || p != end) {
        throw ConfigError("config key '" + std::string(key) + "' expects an unsigned integer, found '" + *v + "'");
    }
    return out;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + std::string(key) + "' expects true/false, found '" + *v + "'");
}

std::string KeyValueConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t KeyValueConfig::hash() const { return fnv1a64(to_text()); }

std::string KeyValueConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

}  // namespace hlchoice
