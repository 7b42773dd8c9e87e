#pragma once

#include <string>
#include <vector>

#include "rflego/synth.hpp"

namespace rflego::io {

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Binary container, all integers and floats little-endian:
///   8 bytes  magic "RFLGDSET"
///   u32      format version
///   u64      header length, then that many bytes of UTF-8 JSON (module, config echo, frame count)
///   frames   f64 snr_db, f64 signal_power, f64 noise_variance,
///            u32 n + input (complex: n re/im f64 pairs; real: n f64),
///            u32 n + target (detector: n mask bytes; otherwise n f64),
///            u32 n + truth (n f64), u32 n + truth bins (n i32)
std::vector<unsigned char> encode_dataset(const synth::Dataset& ds);
synth::Dataset decode_dataset(const std::vector<unsigned char>& bytes);

void write_dataset(const std::string& path, const synth::Dataset& ds);
synth::Dataset read_dataset(const std::string& path);

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& bytes);
void write_text(const std::string& path, const std::string& text);

}  // namespace rflego::io
