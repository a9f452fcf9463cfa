#include "mmkd/nn/checkpoint.hpp"

#include "mmkd/error.hpp"
#include "mmkd/nn/optim.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace mmkd::nn {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& dir, nlohmann::json manifest,
                      const ParameterList& params) {
  std::filesystem::create_directories(dir);
  manifest["format_version"] = kCheckpointVersion;
  manifest["checksum"] = checksum(params);
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write " + (dir / "params.bin").string());
    write_blob(out, flatten(params));
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Error(ErrorKind::kIoError, "missing checkpoint manifest in " + dir.string());
  Checkpoint ckpt;
  ckpt.manifest = nlohmann::json::parse(mf);
  if (ckpt.manifest.value("format_version", 0) != kCheckpointVersion) {
    throw Error(ErrorKind::kIoError, "unsupported checkpoint version in " + dir.string());
  }
  std::ifstream blob(dir / "params.bin", std::ios::binary);
  if (!blob) throw Error(ErrorKind::kIoError, "missing params.bin in " + dir.string());
  ckpt.params = read_blob(blob);
  return ckpt;
}

void write_f32_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
    }
  }
}

Matrix read_f32_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read " + path.string());
  const auto rows = static_cast<Eigen::Index>(get_u32(in));
  const auto cols = static_cast<Eigen::Index>(get_u32(in));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = std::bit_cast<float>(get_u32(in));
  }
  if (!in) throw Error(ErrorKind::kIoError, "truncated matrix file " + path.string());
  return m;
}

}  // namespace mmkd::nn
