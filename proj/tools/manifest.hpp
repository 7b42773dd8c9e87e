#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

namespace rflego::cli {

std::string sha256_file(const std::string& path);
std::string sha256_bytes(const std::string& bytes);

/// Sidecar written next to every output file as <output>.manifest.json.
class RunManifest {
public:
    RunManifest(std::string command, std::vector<std::string> argv);

    void set_config(std::map<std::string, std::string> config) { config_ = std::move(config); }
    void add_seed(const std::string& name, unsigned long long seed) { seeds_[name] = seed; }
    void add_input(const std::string& path);
    void add_output(const std::string& path);

    /// Writes one manifest per registered output.
    void write() const;
    std::string to_json() const;

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::map<std::string, std::string> config_;
    std::map<std::string, unsigned long long> seeds_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

/// Recomputes every digest listed in a manifest; returns the paths whose digest differs.
std::vector<std::string> verify_manifest(const std::string& manifest_path);

}  // namespace rflego::cli
