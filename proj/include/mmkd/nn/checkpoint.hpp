#pragma once

#include "mmkd/nn/layers.hpp"

#include <filesystem>
#include <vector>

#include <json.hpp>

namespace mmkd::nn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json manifest;
  std::vector<double> params;
};

// Writes <dir>/manifest.json and <dir>/params.bin. The manifest gains
// "format_version" and "checksum" (FNV-1a of the parameter blob).
void write_checkpoint(const std::filesystem::path& dir, nlohmann::json manifest,
                      const ParameterList& params);
Checkpoint read_checkpoint(const std::filesystem::path& dir);

// Dense float32 matrix file: u32 rows, u32 cols, then rows*cols float32
// values in row-major order, all little-endian.
void write_f32_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_f32_matrix(const std::filesystem::path& path);

}  // namespace mmkd::nn
