#include "mmkd/audio/tts.hpp"

#include "mmkd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mmkd::audio {

namespace {

constexpr double kUnitSeconds = 0.05;
constexpr double kEllipsisSeconds = 0.15;
constexpr double kAmplitude = 0.3;

bool sentence_final(std::string_view token) {
  const char c = token.back();
  return c == '.' || c == '!' || c == '?';
}

// Decodes one UTF-8 code point starting at `i`, advancing `i`.
std::uint32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xe ? 3 : (b >> 3) == 0x1e ? 4 : 1;
  if (i + len > s.size()) len = 1;
  std::uint32_t cp = len == 1 ? b : len == 2 ? (b & 0x1f) : len == 3 ? (b & 0x0f) : (b & 0x07);
  for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
  i += len;
  return cp;
}

void append_silence(std::vector<float>& out, double seconds, int rate) {
  out.insert(out.end(), static_cast<std::size_t>(std::lround(seconds * rate)), 0.0f);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

std::uint32_t le(const unsigned char* p, int n) {
  std::uint32_t v = 0;
  for (int k = n - 1; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

}  // namespace

std::vector<std::string> chunk_text(std::string_view text, std::size_t max_tokens) {
  if (max_tokens == 0) throw Error(ErrorKind::kInvalidConfig, "chunk size must be positive");
  std::vector<std::vector<std::string>> sentences(1);
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '\n') {
      if (!sentences.back().empty()) sentences.emplace_back();
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    const std::string_view token = text.substr(i, j - i);
    sentences.back().emplace_back(token);
    if (sentence_final(token)) sentences.emplace_back();
    i = j;
  }
  std::vector<std::string> chunks;
  for (const auto& s : sentences) {
    for (std::size_t start = 0; start < s.size(); start += max_tokens) {
      std::string chunk;
      for (std::size_t k = start; k < std::min(s.size(), start + max_tokens); ++k) {
        if (!chunk.empty()) chunk += ' ';
        chunk += s[k];
      }
      chunks.push_back(std::move(chunk));
    }
  }
  if (chunks.empty()) throw Error(ErrorKind::kEmptyText, "nothing to synthesize");
  return chunks;
}

double ToneTtsBackend::frequency(std::uint32_t code_point) const {
  std::uint64_t h = 1469598103934665603ULL ^ seed_;
  for (int k = 0; k < 4; ++k) {
    h ^= (code_point >> (8 * k)) & 0xff;
    h *= 1099511628211ULL;
  }
  return 150.0 + static_cast<double>(h % 3800);
}

Waveform ToneTtsBackend::synth(std::string_view chunk) const {
  Waveform wav;
  wav.sample_rate = kSampleRate;
  const auto unit = static_cast<std::size_t>(std::lround(kUnitSeconds * kSampleRate));
  std::size_t i = 0;
  while (i < chunk.size()) {
    if (chunk.substr(i, 3) == "...") {
      append_silence(wav.samples, kEllipsisSeconds, kSampleRate);
      i += 3;
      continue;
    }
    const std::uint32_t cp = next_code_point(chunk, i);
    if (cp < 0x80 && std::isspace(static_cast<int>(cp))) {
      append_silence(wav.samples, kUnitSeconds, kSampleRate);
      continue;
    }
    const double f = frequency(cp);
    for (std::size_t n = 0; n < unit; ++n) {
      wav.samples.push_back(static_cast<float>(
          kAmplitude * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / kSampleRate)));
    }
  }
  const auto cap = static_cast<std::size_t>(max_clip_seconds() * kSampleRate);
  if (wav.samples.size() > cap) wav.samples.resize(cap);
  return wav;
}

std::unique_ptr<TtsBackend> make_tts_backend(std::string_view id, std::uint64_t seed) {
  if (id == "toy-tone") return std::make_unique<ToneTtsBackend>(seed);
  throw Error(ErrorKind::kBackendFailure,
              "TTS backend '" + std::string(id) + "' is not available in this build");
}

std::vector<std::string> known_tts_backends() { return {"toy-tone"}; }

Waveform synthesize(const std::vector<std::string>& chunks, const TtsBackend& backend) {
  if (chunks.empty()) throw Error(ErrorKind::kEmptyText, "nothing to synthesize");
  Waveform out;
  out.sample_rate = backend.sample_rate();
  if (out.sample_rate <= 0) {
    throw Error(ErrorKind::kBackendFailure, backend.name() + " declares no sample rate");
  }
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    Waveform clip;
    try {
      clip = backend.synth(chunks[c]);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kBackendFailure, backend.name() + " failed on chunk " +
                                                  std::to_string(c) + ": " + e.what());
    }
    if (clip.sample_rate != out.sample_rate) {
      throw Error(ErrorKind::kBackendFailure, backend.name() + " changed sample rate mid-stream");
    }
    for (float s : clip.samples) {
      if (!std::isfinite(s)) throw Error(ErrorKind::kBackendFailure, backend.name() + " emitted non-finite samples");
    }
    if (clip.duration() > backend.max_clip_seconds() + 1e-9) {
      throw Error(ErrorKind::kClipTooLong, backend.name() + " returned a " +
                                               std::to_string(clip.duration()) + " s clip");
    }
    out.samples.insert(out.samples.end(), clip.samples.begin(), clip.samples.end());
  }
  return out;
}

Waveform resample(const Waveform& wav, int target_rate) {
  if (target_rate <= 0) throw Error(ErrorKind::kInvalidConfig, "target sample rate must be positive");
  if (wav.sample_rate == target_rate || wav.samples.empty()) {
    Waveform out = wav;
    out.sample_rate = target_rate;
    return out;
  }
  Waveform out;
  out.sample_rate = target_rate;
  const auto n = static_cast<std::size_t>(
      std::llround(static_cast<double>(wav.samples.size()) * target_rate / wav.sample_rate));
  out.samples.resize(n);
  const double step = static_cast<double>(wav.sample_rate) / target_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    const float a = wav.samples[std::min(k, wav.samples.size() - 1)];
    const float b = wav.samples[std::min(k + 1, wav.samples.size() - 1)];
    out.samples[i] = static_cast<float>(a + frac * (b - a));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wav) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (float s : wav.samples) {
    const double clamped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32767.0))));
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw Error(ErrorKind::kIoError, path.string() + " is not a RIFF/WAVE file");
  }
  Waveform wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::uint32_t size = le(p + pos + 4, 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) break;
    if (id == "fmt ") {
      if (le(p + body, 2) != 1 || le(p + body + 2, 2) != 1 || le(p + body + 14, 2) != 16) {
        throw Error(ErrorKind::kIoError, path.string() + ": only 16-bit PCM mono is supported");
      }
      wav.sample_rate = static_cast<int>(le(p + body + 4, 4));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) break;
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le(p + body + 2 * i, 2));
        wav.samples[i] = static_cast<float>(v / 32767.0);
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw Error(ErrorKind::kIoError, path.string() + ": missing fmt or data chunk");
}

}  // namespace mmkd::audio
