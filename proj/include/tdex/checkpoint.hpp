#pragma once

// Checkpoint directory layout:
//   manifest.json  names, shapes, offsets, dtype/layout, plus free-form `meta`
//   params.bin     little-endian float32 values concatenated in manifest order

#include <filesystem>

#include <json.hpp>

#include "tdex/nn.hpp"

namespace tdex {

struct Checkpoint {
    ParamStore params;
    nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Little-endian float32 matrix helpers shared with feature files.
void write_f32_le(std::ostream& out, std::span<const double> values);
std::vector<double> read_f32_le(std::istream& in, std::size_t count);

}  // namespace tdex
