#pragma once

#include <string>
#include <utility>

#include "rflego/lego_beamformer.hpp"
#include "rflego/lego_detector.hpp"
#include "rflego/lego_ft.hpp"
#include "rflego/steering.hpp"

namespace rflego::io {

inline constexpr int kParamsVersion = 1;

/// Parameters are stored as JSON: {"format": "rflego-params", "version", "module", "meta", "blocks": [
/// {"name", "complex", "rows", "cols", "trainable", "values"}]}. Complex values are interleaved re/im.
/// Doubles are written with round-trip precision, so save/load is lossless.
std::string encode_ft_params(const ft::FTParams& p);
ft::FTParams decode_ft_params(const std::string& text);

std::string encode_bf_params(const bf::BFParams& p, const SteeringDictionary& a);
std::pair<bf::BFParams, SteeringDictionary> decode_bf_params(const std::string& text);

std::string encode_det_params(const det::SSMParams& p);
det::SSMParams decode_det_params(const std::string& text);

/// Module name stored in a params file ("ft", "beamformer", "detector").
std::string params_module(const std::string& text);

std::string read_text(const std::string& path);

}  // namespace rflego::io
