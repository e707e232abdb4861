#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace hlchoice {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, std::string_view origin = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);

    /// Applies a `key=value` override; throws ConfigError when malformed.
    void apply_override(std::string_view assignment);
    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

    bool has(std::string_view key) const { return values_.find(key) != values_.end(); }
    std::optional<std::string> find(std::string_view key) const;

    std::string get_string(std::string_view key, std::string_view fallback) const;
    double get_double(std::string_view key, double fallback) const;
    long long get_int(std::string_view key, long long fallback) const;
    std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;

    /// Sorted `key = value` lines; the canonical form that is hashed.
    std::string to_text() const;
    std::uint64_t hash() const;
    std::string hash_hex() const;

    const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

private:
    std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace hlchoice
