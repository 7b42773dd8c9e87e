#include "rflego/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "rflego/errors.hpp"

namespace rflego {

namespace {

std::string trim(const std::string& s) {
    const auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
    const auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
    return first < last ? std::string(first, last) : std::string();
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
    KeyValues kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (kv.values_.count(key)) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        kv.values_[key] = trim(line.substr(eq + 1));
    }
    if (!kv.values_.count("version")) {
        throw ValidationError(origin + ": missing 'version' key");
    }
    if (kv.get_int("version", 0) != kConfigVersion) {
        throw ValidationError(origin + ": unsupported config version " + kv.values_["version"]);
    }
    return kv;
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
    used_[key] = true;
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    used_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError(origin_ + ": key '" + key + "' is not a number: '" + it->second + "'");
    }
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
    used_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError(origin_ + ": key '" + key + "' is not an integer: '" + it->second + "'");
    }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    const std::string v = get(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError(origin_ + ": key '" + key + "' is not a boolean: '" + v + "'");
}

std::string KeyValues::first_unused_key() const {
    for (const auto& [key, value] : values_) {
        if (key != "version" && !used_.count(key)) return key;
    }
    return {};
}

std::string KeyValues::to_string() const {
    std::ostringstream out;
    out << "version = " << kConfigVersion << "\n";
    for (const auto& [key, value] : values_) {
        if (key == "version") continue;
        out << key << " = " << value << "\n";
    }
    return out.str();
}

}  // namespace rflego
