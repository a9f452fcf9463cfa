#pragma once

#include "mmkd/audio/tts.hpp"
#include "mmkd/nn/autograd.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mmkd::audio {

inline constexpr int kWindow = 400;  // 25 ms at 16 kHz
inline constexpr int kHop = 160;     // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kMelBins = 128;
inline constexpr double kLogFloor = 1e-10;

struct Spectrogram {
  nn::Matrix values;  // frames x 128, float32-representable
  double duration_seconds = 0.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
};

// floor((max(n, 400) - 400) / 160) + 1
std::size_t frame_count(std::size_t samples);

// 128 x 257 HTK-mel triangles spanning 0 Hz to Nyquist.
const nn::Matrix& mel_filterbank();

// Hamming-windowed STFT magnitude -> mel filters -> ln(max(x, 1e-10)).
// Input at other rates is resampled to 16 kHz first. Values are rounded to
// float32 so the spectrogram cache is lossless.
Spectrogram log_mel_spectrogram(const Waveform& wav);

struct NormStats {
  double mean = 0.0;
  double std = 0.0;
  std::string source;
};

void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);

// Mean and population standard deviation over every value of every input.
NormStats compute_norm_stats(std::span<const Spectrogram> specs, std::string source);

// x' = (x - mean) / (2 std); zeros when std < 1e-8.
Spectrogram normalize_spectrogram(Spectrogram spec, const NormStats& stats);

// Patch layout on the (128 mel bins) x (frames) plane.
struct PatchGrid {
  int patch = 16;
  int overlap = 6;
  int stride = 10;
  Eigen::Index n_freq = 0;
  Eigen::Index n_time = 0;
  Eigen::Index padded_frames = 0;  // time axis after zero-padding to >= patch

  Eigen::Index size() const { return n_freq * n_time; }
};

// floor(6 * patch / 16): 6 for 16 x 16 patches.
int default_overlap(int patch);

// Throws InvalidPatchGrid when the patch does not fit the mel axis or the
// overlap leaves no positive stride. `overlap < 0` selects default_overlap.
PatchGrid patch_grid(Eigen::Index frames, int patch = 16, int overlap = -1);

struct PatchSequence {
  nn::Matrix patches;  // N x (patch * patch), each patch flattened bin-major
  std::vector<std::pair<Eigen::Index, Eigen::Index>> positions;  // (freq, time) grid index
  PatchGrid grid;
};

// Row-major over (freq, time): patch (f, t) covers bins
// [f * stride, f * stride + patch) and frames [t * stride, t * stride + patch).
PatchSequence extract_patches(const Spectrogram& spec, int patch = 16, int overlap = -1);

// Keeps the first `max_frames` frames.
Spectrogram truncate_frames(Spectrogram spec, Eigen::Index max_frames);

// u32 frames, u32 bins, float32 values row-major, little-endian.
void write_spectrogram_cache(const std::filesystem::path& path, const Spectrogram& spec);
Spectrogram read_spectrogram_cache(const std::filesystem::path& path);

}  // namespace mmkd::audio
