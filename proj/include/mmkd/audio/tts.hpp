#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace mmkd::audio {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<float> samples;  // mono, [-1, 1]
  int sample_rate = kSampleRate;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Splits after sentence-final tokens (ending in '.', '!' or '?') and at
// newlines, then cuts any sentence longer than `max_tokens` whitespace
// tokens into greedy runs. Throws EmptyText when there is nothing to say.
std::vector<std::string> chunk_text(std::string_view text, std::size_t max_tokens = 45);

class TtsBackend {
 public:
  virtual ~TtsBackend() = default;
  virtual std::string name() const = 0;
  virtual int sample_rate() const = 0;
  virtual double max_clip_seconds() const = 0;
  virtual Waveform synth(std::string_view chunk) const = 0;
};

// Deterministic stand-in: every code point becomes a 50 ms tone whose
// frequency comes from a seeded table, whitespace a 50 ms gap and "..." a
// 150 ms gap. Clips are cut at 13 s.
class ToneTtsBackend final : public TtsBackend {
 public:
  explicit ToneTtsBackend(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "toy-tone"; }
  int sample_rate() const override { return kSampleRate; }
  double max_clip_seconds() const override { return 13.0; }
  Waveform synth(std::string_view chunk) const override;
  double frequency(std::uint32_t code_point) const;

 private:
  std::uint64_t seed_;
};

// Known ids: "toy-tone". Anything else raises BackendFailure.
std::unique_ptr<TtsBackend> make_tts_backend(std::string_view id, std::uint64_t seed = 0);
std::vector<std::string> known_tts_backends();

// Synthesizes every chunk and concatenates the clips at the backend rate.
// BackendFailure when the backend throws or returns an invalid clip;
// ClipTooLong when a clip exceeds the backend's declared cap.
Waveform synthesize(const std::vector<std::string>& chunks, const TtsBackend& backend);

// Linear-interpolation resampling.
Waveform resample(const Waveform& wav, int target_rate);

// 16-bit PCM mono RIFF/WAVE.
void write_wav(const std::filesystem::path& path, const Waveform& wav);
Waveform read_wav(const std::filesystem::path& path);

}  // namespace mmkd::audio
