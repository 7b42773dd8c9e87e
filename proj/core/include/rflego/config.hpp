#pragma once

#include <map>
#include <string>

namespace rflego {

/// Plain `key = value` text with `#` comments. A `version` key is required
/// and must equal kConfigVersion.
class KeyValues {
public:
    static constexpr int kConfigVersion = 1;

    static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValues load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

    /// Keys read through get*() are recorded; anything else present is reported here.
    std::string first_unused_key() const;

    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> used_;
    std::string origin_;
};

}  // namespace rflego
