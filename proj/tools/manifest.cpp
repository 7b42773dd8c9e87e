#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "rflego/dataset_io.hpp"
#include "rflego/errors.hpp"

namespace rflego::cli {

using nlohmann::json;

namespace {

std::string hex_digest(const unsigned char* data, std::size_t size) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data, size, md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw NumericError("sha256: digest computation failed");
    }
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

}  // namespace

std::string sha256_file(const std::string& path) {
    const auto bytes = io::read_file(path);
    return hex_digest(bytes.data(), bytes.size());
}

std::string sha256_bytes(const std::string& bytes) {
    return hex_digest(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::string& path) { inputs_.emplace_back(path, sha256_file(path)); }

void RunManifest::add_output(const std::string& path) { outputs_.push_back(path); }

std::string RunManifest::to_json() const {
    json j;
    j["format"] = "rflego-manifest";
    j["version"] = 1;
    j["library_version"] = RFLEGO_VERSION;
    j["command"] = command_;
    j["argv"] = argv_;
    j["config"] = config_;
    j["seeds"] = seeds_;
    json in = json::array();
    for (const auto& [p, d] : inputs_) in.push_back({{"path", p}, {"sha256", d}});
    j["inputs"] = in;
    json out = json::array();
    for (const auto& p : outputs_) out.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    j["outputs"] = out;
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return j.dump(2) + "\n";
}

void RunManifest::write() const {
    const std::string text = to_json();
    for (const auto& p : outputs_) io::write_text(p + ".manifest.json", text);
}

std::vector<std::string> verify_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest '" + manifest_path + "'");
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "rflego-manifest") {
        throw ValidationError("'" + manifest_path + "' is not an rflego manifest");
    }
    std::vector<std::string> bad;
    for (const char* key : {"inputs", "outputs"}) {
        for (const auto& e : j.at(key)) {
            const std::string p = e.at("path").get<std::string>();
            if (sha256_file(p) != e.at("sha256").get<std::string>()) bad.push_back(p);
        }
    }
    return bad;
}

}  // namespace rflego::cli
