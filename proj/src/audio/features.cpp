#include "mmkd/audio/features.hpp"

#include "mmkd/error.hpp"
#include "mmkd/nn/checkpoint.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

namespace mmkd::audio {

namespace {

constexpr int kSpectrumBins = kFftSize / 2 + 1;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

nn::Matrix build_filterbank() {
  const double nyquist = kSampleRate / 2.0;
  const double top = hz_to_mel(nyquist);
  std::vector<double> edges(kMelBins + 2);
  for (int i = 0; i < kMelBins + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(top * i / (kMelBins + 1));
  nn::Matrix fb = nn::Matrix::Zero(kMelBins, kSpectrumBins);
  for (int m = 0; m < kMelBins; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < kSpectrumBins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kFftSize;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      fb(m, k) = std::max(0.0, w);
    }
  }
  return fb;
}

std::vector<double> hamming() {
  std::vector<double> w(kWindow);
  for (int n = 0; n < kWindow; ++n) {
    w[static_cast<std::size_t>(n)] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kWindow - 1));
  }
  return w;
}

// FFTW planning is not thread-safe; executing a finished plan on fresh
// arrays is.
struct FftPlan {
  fftw_plan plan;
  FftPlan() {
    auto* in = fftw_alloc_real(kFftSize);
    auto* out = fftw_alloc_complex(kSpectrumBins);
    plan = fftw_plan_dft_r2c_1d(kFftSize, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
};

const FftPlan& fft_plan() {
  static const FftPlan plan;
  return plan;
}

}  // namespace

std::size_t frame_count(std::size_t samples) {
  const std::size_t n = std::max<std::size_t>(samples, kWindow);
  return (n - kWindow) / kHop + 1;
}

const nn::Matrix& mel_filterbank() {
  static const nn::Matrix fb = build_filterbank();
  return fb;
}

Spectrogram log_mel_spectrogram(const Waveform& input) {
  const Waveform wav = input.sample_rate == kSampleRate ? input : resample(input, kSampleRate);
  std::vector<double> samples(wav.samples.begin(), wav.samples.end());
  if (samples.size() < static_cast<std::size_t>(kWindow)) samples.resize(kWindow, 0.0);
  const std::size_t frames = frame_count(samples.size());

  static const std::vector<double> window = hamming();
  const nn::Matrix& fb = mel_filterbank();
  double* in = fftw_alloc_real(kFftSize);
  fftw_complex* out = fftw_alloc_complex(kSpectrumBins);
  const fftw_plan plan = fft_plan().plan;

  Spectrogram spec;
  spec.duration_seconds = input.duration();
  spec.values.resize(static_cast<Eigen::Index>(frames), kMelBins);
  Eigen::VectorXd magnitude(kSpectrumBins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (int n = 0; n < kFftSize; ++n) {
      in[n] = n < kWindow ? samples[t * kHop + static_cast<std::size_t>(n)] * window[static_cast<std::size_t>(n)] : 0.0;
    }
    fftw_execute_dft_r2c(plan, in, out);
    for (int k = 0; k < kSpectrumBins; ++k) magnitude(k) = std::hypot(out[k][0], out[k][1]);
    const Eigen::VectorXd mel = fb * magnitude;
    for (int m = 0; m < kMelBins; ++m) {
      spec.values(static_cast<Eigen::Index>(t), m) =
          static_cast<float>(std::log(std::max(mel(m), kLogFloor)));
    }
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

void to_json(nlohmann::json& j, const NormStats& s) {
  j = {{"mean", s.mean}, {"std", s.std}, {"source", s.source}};
}

void from_json(const nlohmann::json& j, NormStats& s) {
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.source = j.value("source", "");
}

NormStats compute_norm_stats(std::span<const Spectrogram> specs, std::string source) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& s : specs) {
    sum += s.values.sum();
    count += static_cast<double>(s.values.size());
  }
  if (count == 0.0) throw Error(ErrorKind::kEmptyDataset, "no spectrogram values for statistics");
  const double mean = sum / count;
  double sq = 0.0;
  for (const auto& s : specs) sq += (s.values.array() - mean).square().sum();
  return {mean, std::sqrt(sq / count), std::move(source)};
}

Spectrogram normalize_spectrogram(Spectrogram spec, const NormStats& stats) {
  if (stats.std < 1e-8) {
    spec.values.setZero();
  } else {
    spec.values = (spec.values.array() - stats.mean) / (2.0 * stats.std);
  }
  return spec;
}

int default_overlap(int patch) { return 6 * patch / 16; }

PatchGrid patch_grid(Eigen::Index frames, int patch, int overlap) {
  if (overlap < 0) overlap = default_overlap(patch);
  if (patch < 1 || patch > kMelBins) {
    throw Error(ErrorKind::kInvalidPatchGrid,
                "patch size " + std::to_string(patch) + " does not fit " + std::to_string(kMelBins) + " mel bins");
  }
  if (overlap >= patch) {
    throw Error(ErrorKind::kInvalidPatchGrid, "overlap " + std::to_string(overlap) +
                                                  " leaves no stride for patch " + std::to_string(patch));
  }
  PatchGrid g;
  g.patch = patch;
  g.overlap = overlap;
  g.stride = patch - overlap;
  g.padded_frames = std::max<Eigen::Index>(frames, patch);
  g.n_freq = (kMelBins - patch) / g.stride + 1;
  g.n_time = (g.padded_frames - patch) / g.stride + 1;
  return g;
}

PatchSequence extract_patches(const Spectrogram& spec, int patch, int overlap) {
  if (spec.bins() != kMelBins) {
    throw Error(ErrorKind::kInvalidPatchGrid, "spectrogram must have 128 mel bins");
  }
  PatchSequence seq;
  seq.grid = patch_grid(spec.frames(), patch, overlap);
  const auto& g = seq.grid;
  nn::Matrix padded = nn::Matrix::Zero(g.padded_frames, kMelBins);
  padded.topRows(spec.frames()) = spec.values;
  seq.patches.resize(g.size(), static_cast<Eigen::Index>(patch) * patch);
  seq.positions.reserve(static_cast<std::size_t>(g.size()));
  Eigen::Index row = 0;
  for (Eigen::Index f = 0; f < g.n_freq; ++f) {
    for (Eigen::Index t = 0; t < g.n_time; ++t) {
      const Eigen::Index b0 = f * g.stride;
      const Eigen::Index t0 = t * g.stride;
      for (Eigen::Index b = 0; b < patch; ++b) {
        for (Eigen::Index k = 0; k < patch; ++k) {
          seq.patches(row, b * patch + k) = padded(t0 + k, b0 + b);
        }
      }
      seq.positions.emplace_back(f, t);
      ++row;
    }
  }
  return seq;
}

Spectrogram truncate_frames(Spectrogram spec, Eigen::Index max_frames) {
  if (max_frames > 0 && spec.frames() > max_frames) {
    spec.values.conservativeResize(max_frames, Eigen::NoChange);
  }
  return spec;
}

void write_spectrogram_cache(const std::filesystem::path& path, const Spectrogram& spec) {
  nn::write_f32_matrix(path, spec.values);
}

Spectrogram read_spectrogram_cache(const std::filesystem::path& path) {
  Spectrogram s;
  s.values = nn::read_f32_matrix(path);
  if (s.values.cols() != kMelBins) {
    throw Error(ErrorKind::kIoError, path.string() + " does not hold 128 mel bins");
  }
  s.duration_seconds = static_cast<double>((s.frames() - 1) * kHop + kWindow) / kSampleRate;
  return s;
}

}  // namespace mmkd::audio
