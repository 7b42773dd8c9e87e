#include "rflego/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "rflego/errors.hpp"

namespace rflego::io {

namespace {

constexpr char kMagic[8] = {'R', 'F', 'L', 'G', 'D', 'S', 'E', 'T'};

class Writer {
public:
    void u8(unsigned char v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        out.insert(out.end(), c, c + n);
    }
    std::uint32_t count(std::size_t n) {
        if (n > 0xffffffffULL) throw DataError("dataset record too large");
        u32(static_cast<std::uint32_t>(n));
        return static_cast<std::uint32_t>(n);
    }

    std::vector<unsigned char> out;
};

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& b) : buf(b) {}

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ValidationError("dataset file is truncated");
    }
    unsigned char u8() {
        need(1);
        return buf[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
};

nlohmann::json config_json(const synth::SynthConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    const KeyValues kv = cfg.to_keyvalues();
    for (const auto& [k, v] : kv.entries()) j[k] = v;
    return j;
}

}  // namespace

std::vector<unsigned char> encode_dataset(const synth::Dataset& ds) {
    const auto kind = ds.config.kind;
    const bool complex_input = kind != synth::ModuleKind::DET;
    nlohmann::json header = {
        {"format", "rflego-dataset"},
        {"version", kDatasetVersion},
        {"module", synth::module_name(kind)},
        {"n_frames", ds.frames.size()},
        {"input", complex_input ? "complex_f64" : "real_f64"},
        {"target", complex_input ? "f64" : "mask_u8"},
        {"config", config_json(ds.config)},
    };
    const std::string htext = header.dump();

    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kDatasetVersion);
    w.u64(htext.size());
    w.bytes(htext.data(), htext.size());
    for (const auto& f : ds.frames) {
        w.f64(f.snr_db);
        w.f64(f.signal_power);
        w.f64(f.noise_variance);
        if (complex_input) {
            w.count(f.input_c.size());
            for (const auto& v : f.input_c) {
                w.f64(v.real());
                w.f64(v.imag());
            }
        } else {
            w.count(f.input_r.size());
            for (double v : f.input_r) w.f64(v);
        }
        w.count(f.target.size());
        for (double v : f.target) {
            if (complex_input) {
                w.f64(v);
            } else {
                w.u8(v != 0.0 ? 1 : 0);
            }
        }
        w.count(f.truth.size());
        for (double v : f.truth) w.f64(v);
        w.count(f.truth_bins.size());
        for (int v : f.truth_bins) w.i32(v);
    }
    return std::move(w.out);
}

synth::Dataset decode_dataset(const std::vector<unsigned char>& bytes) {
    Reader r(bytes);
    r.need(sizeof(kMagic));
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ValidationError("not an rflego dataset (bad magic)");
    }
    r.pos = sizeof(kMagic);
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw ValidationError("unsupported dataset version " + std::to_string(version));
    }
    const std::uint64_t hlen = r.u64();
    r.need(hlen);
    const std::string htext(reinterpret_cast<const char*>(bytes.data() + r.pos), hlen);
    r.pos += hlen;

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("dataset header is not valid JSON: ") + e.what());
    }
    KeyValues kv;
    for (const auto& [k, v] : header.at("config").items()) kv.set(k, v.get<std::string>());
    synth::Dataset ds;
    ds.config = synth::SynthConfig::from_keyvalues(kv);
    const auto n_frames = header.at("n_frames").get<std::size_t>();
    const bool complex_input = ds.config.kind != synth::ModuleKind::DET;

    ds.frames.resize(n_frames);
    for (auto& f : ds.frames) {
        f.snr_db = r.f64();
        f.signal_power = r.f64();
        f.noise_variance = r.f64();
        const std::uint32_t n_in = r.u32();
        if (complex_input) {
            r.need(16ULL * n_in);
            f.input_c.resize(n_in);
            for (auto& v : f.input_c) {
                const double re = r.f64();
                const double im = r.f64();
                v = {re, im};
            }
        } else {
            r.need(8ULL * n_in);
            f.input_r.resize(n_in);
            for (auto& v : f.input_r) v = r.f64();
        }
        const std::uint32_t n_t = r.u32();
        f.target.resize(n_t);
        for (auto& v : f.target) {
            if (complex_input) {
                v = r.f64();
            } else {
                const unsigned char b = r.u8();
                if (b > 1) throw ValidationError("dataset mask byte is not 0/1");
                v = b;
            }
        }
        const std::uint32_t n_truth = r.u32();
        f.truth.resize(n_truth);
        for (auto& v : f.truth) v = r.f64();
        const std::uint32_t n_bins = r.u32();
        f.truth_bins.resize(n_bins);
        for (auto& v : f.truth_bins) v = r.i32();
    }
    if (r.pos != bytes.size()) {
        throw ValidationError("dataset file has trailing bytes");
    }
    return ds;
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

void write_dataset(const std::string& path, const synth::Dataset& ds) { write_file(path, encode_dataset(ds)); }

synth::Dataset read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

}  // namespace rflego::io
