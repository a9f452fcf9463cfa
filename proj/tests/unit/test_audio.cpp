#include <doctest.h>

#include "mmkd/audio/audio_teacher.hpp"
#include "mmkd/corpus/fixtures.hpp"
#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

using namespace mmkd;
using namespace mmkd::audio;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an mmkd::Error");
  return ErrorKind::kStageFailure;
}

Waveform tone(double hz, double seconds, double amplitude = 0.5) {
  Waveform w;
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples.push_back(static_cast<float>(
        amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / kSampleRate)));
  }
  return w;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Brute-force count of window start positions along one axis.
Eigen::Index starts(Eigen::Index length, int patch, int stride) {
  Eigen::Index n = 0;
  for (Eigen::Index s = 0; s + patch <= length; s += stride) ++n;
  return n;
}

class FixedBackend final : public TtsBackend {
 public:
  explicit FixedBackend(double seconds, bool fail = false) : seconds_(seconds), fail_(fail) {}
  std::string name() const override { return "fixed"; }
  int sample_rate() const override { return kSampleRate; }
  double max_clip_seconds() const override { return 13.0; }
  Waveform synth(std::string_view) const override {
    if (fail_) throw std::runtime_error("model crashed");
    return tone(440.0, seconds_);
  }

 private:
  double seconds_;
  bool fail_;
};

}  // namespace

TEST_CASE("chunk_text splits sentences and caps chunk length") {
  CHECK(chunk_text("Hi. Bye.") == std::vector<std::string>{"Hi.", "Bye."});
  std::string long_text;
  for (int i = 0; i < 100; ++i) long_text += "w" + std::to_string(i) + " ";
  const auto chunks = chunk_text(long_text);
  REQUIRE(chunks.size() == 3);
  const auto count = [](const std::string& s) {
    std::istringstream in(s);
    return std::distance(std::istream_iterator<std::string>(in), std::istream_iterator<std::string>());
  };
  CHECK(count(chunks[0]) == 45);
  CHECK(count(chunks[1]) == 45);
  CHECK(count(chunks[2]) == 10);
  CHECK(chunks[0].substr(0, 6) == "w0 w1 ");
  CHECK(chunk_text("line one\nline two") == std::vector<std::string>{"line one", "line two"});
  CHECK(kind_of([] { chunk_text(""); }) == ErrorKind::kEmptyText);
  CHECK(kind_of([] { chunk_text("  \n "); }) == ErrorKind::kEmptyText);
}

TEST_CASE("synthesis concatenates clips deterministically") {
  const ToneTtsBackend tts(3);
  const auto one = synthesize({"hello"}, tts);
  CHECK(one.duration() == doctest::Approx(tts.synth("hello").duration()));
  CHECK(one.duration() == doctest::Approx(0.25));
  const auto two = synthesize({"hello", "there"}, tts);
  const auto three = synthesize({"hello", "there", "you"}, tts);
  CHECK(two.duration() > one.duration());
  CHECK(three.duration() > two.duration());
  CHECK(tts.synth("a...").duration() == doctest::Approx(0.2));

  const auto dir = std::filesystem::temp_directory_path() / "mmkd_tts";
  write_wav(dir / "a.wav", synthesize(chunk_text("I feel so alone... :("), ToneTtsBackend(3)));
  write_wav(dir / "b.wav", synthesize(chunk_text("I feel so alone... :("), ToneTtsBackend(3)));
  CHECK(file_bytes(dir / "a.wav") == file_bytes(dir / "b.wav"));
  const auto back = read_wav(dir / "a.wav");
  const auto orig = synthesize(chunk_text("I feel so alone... :("), ToneTtsBackend(3));
  REQUIRE(back.samples.size() == orig.samples.size());
  for (std::size_t i = 0; i < orig.samples.size(); ++i) {
    CHECK(std::abs(back.samples[i] - orig.samples[i]) <= 1.0 / 32767.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthesis enforces the backend contract") {
  CHECK(kind_of([] { synthesize({"x"}, FixedBackend(14.0)); }) == ErrorKind::kClipTooLong);
  CHECK(kind_of([] { synthesize({"x"}, FixedBackend(1.0, true)); }) == ErrorKind::kBackendFailure);
  CHECK(kind_of([] { make_tts_backend("bark"); }) == ErrorKind::kBackendFailure);
  std::string huge(400, 'x');
  CHECK(ToneTtsBackend().synth(huge).duration() == doctest::Approx(13.0));
}

TEST_CASE("log-Mel frame counts and padding") {
  CHECK(frame_count(16000) == 98);
  const auto s = log_mel_spectrogram(tone(440.0, 1.0));
  CHECK(s.frames() == 98);
  CHECK(s.bins() == 128);
  CHECK(log_mel_spectrogram(tone(440.0, 0.01)).frames() == 1);
  CHECK(log_mel_spectrogram(Waveform{}).frames() == 1);

  Waveform silence;
  silence.samples.assign(8000, 0.0f);
  const auto z = log_mel_spectrogram(silence);
  CHECK((z.values.array() == static_cast<double>(static_cast<float>(std::log(kLogFloor)))).all());

  CHECK(log_mel_spectrogram(tone(440.0, 1.0)).values == s.values);
  CHECK(s.values.allFinite());
}

TEST_CASE("log-Mel frames match a direct DFT oracle") {
  const Waveform w = tone(1234.0, 0.1, 0.7);
  const auto spec = log_mel_spectrogram(w);
  const auto& fb = mel_filterbank();
  for (Eigen::Index t : {Eigen::Index{0}, spec.frames() - 1}) {
    Eigen::VectorXd mag(kFftSize / 2 + 1);
    for (int k = 0; k <= kFftSize / 2; ++k) {
      double re = 0, im = 0;
      for (int n = 0; n < kWindow; ++n) {
        const double x = w.samples[static_cast<std::size_t>(t * kHop + n)] *
                         (0.54 - 0.46 * std::cos(2 * std::numbers::pi * n / (kWindow - 1)));
        re += x * std::cos(2 * std::numbers::pi * k * n / kFftSize);
        im -= x * std::sin(2 * std::numbers::pi * k * n / kFftSize);
      }
      mag(k) = std::hypot(re, im);
    }
    const Eigen::VectorXd mel = fb * mag;
    for (int m = 0; m < kMelBins; ++m) {
      const double want = std::log(std::max(mel(m), kLogFloor));
      CHECK(std::abs(spec.values(t, m) - want) < 1e-5 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("mel filterbank is HTK-spaced up to Nyquist") {
  const auto& fb = mel_filterbank();
  CHECK(fb.rows() == 128);
  CHECK(fb.cols() == 257);
  CHECK((fb.array() >= 0.0).all());
  Eigen::Index peak = 0;
  fb.row(127).maxCoeff(&peak);
  CHECK(peak > 240);
  const auto spec = log_mel_spectrogram(tone(1000.0, 0.5));
  Eigen::Index loud = 0;
  spec.values.row(5).maxCoeff(&loud);
  const double mel_1000 = 2595.0 * std::log10(1.0 + 1000.0 / 700.0);
  const double mel_top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  CHECK(std::abs(static_cast<double>(loud + 1) - mel_1000 / mel_top * 129.0) < 3.0);
}

TEST_CASE("normalization") {
  Spectrogram s;
  s.values.resize(1, 2);
  s.values << 0.0, 2.0;
  const auto n = normalize_spectrogram(s, {1.0, 1.0, "x"});
  CHECK(n.values(0, 0) == doctest::Approx(-0.5));
  CHECK(n.values(0, 1) == doctest::Approx(0.5));

  Spectrogram c;
  c.values = nn::Matrix::Constant(3, 128, -4.0);
  const std::vector<Spectrogram> one = {c};
  CHECK(normalize_spectrogram(c, compute_norm_stats(one, "self")).values.isZero());

  std::vector<Spectrogram> train;
  for (double hz : {300.0, 900.0, 2500.0}) train.push_back(log_mel_spectrogram(tone(hz, 0.4)));
  const auto stats = compute_norm_stats(train, "train");
  std::vector<Spectrogram> normed;
  for (const auto& t : train) normed.push_back(normalize_spectrogram(t, stats));
  const auto after = compute_norm_stats(normed, "check");
  CHECK(std::abs(after.mean) < 1e-9);
  CHECK(after.std == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("patch counts equal sliding-window enumeration") {
  Spectrogram s;
  s.values = nn::Matrix::Zero(16, 128);
  CHECK(extract_patches(s).grid.size() == 12);
  s.values = nn::Matrix::Zero(1000, 128);
  const auto big = extract_patches(s);
  CHECK(big.grid.n_freq == 12);
  CHECK(big.grid.n_time == 99);
  CHECK(big.patches.rows() == 1188);

  for (double seconds : {0.16, 0.5, 1.0, 3.0, 10.0, 25.0}) {
    const auto frames =
        static_cast<Eigen::Index>(frame_count(static_cast<std::size_t>(std::lround(seconds * kSampleRate))));
    for (int p : {2, 4, 8, 16, 32, 64}) {
      const auto g = patch_grid(frames, p);
      const int stride = p - (6 * p) / 16;
      const auto want = starts(128, p, stride) * starts(std::max<Eigen::Index>(frames, p), p, stride);
      CHECK(g.size() == want);
    }
  }
  CHECK(kind_of([] { patch_grid(100, 0); }) == ErrorKind::kInvalidPatchGrid);
  CHECK(kind_of([] { patch_grid(100, 200); }) == ErrorKind::kInvalidPatchGrid);
  CHECK(kind_of([] { patch_grid(100, 8, 8); }) == ErrorKind::kInvalidPatchGrid);
}

TEST_CASE("patch contents follow the windowing identity") {
  std::mt19937_64 rng(4);
  Spectrogram s;
  s.values = nn::gaussian(40, 128, 1.0, rng);
  const auto seq = extract_patches(s);
  for (int b = 0; b < 16; ++b) {
    for (int k = 0; k < 16; ++k) CHECK(seq.patches(0, b * 16 + k) == s.values(k, b));
  }
  const auto& [f, t] = seq.positions[13];
  CHECK(seq.grid.n_time == 3);
  CHECK(f == 4);
  CHECK(t == 1);
  CHECK(seq.patches(13, 0) == s.values(10, 40));

  // Zero overlap tiles the (padded) plane exactly once.
  s.values = nn::gaussian(64, 128, 1.0, rng);
  const auto tiles = extract_patches(s, 16, 0);
  nn::Matrix hits = nn::Matrix::Zero(64, 128);
  for (Eigen::Index r = 0; r < tiles.patches.rows(); ++r) {
    const auto [pf, pt] = tiles.positions[static_cast<std::size_t>(r)];
    for (int b = 0; b < 16; ++b) {
      for (int k = 0; k < 16; ++k) {
        hits(pt * 16 + k, pf * 16 + b) += 1.0;
        CHECK(tiles.patches(r, b * 16 + k) == s.values(pt * 16 + k, pf * 16 + b));
      }
    }
  }
  CHECK((hits.array() == 1.0).all());

  Spectrogram tiny;
  tiny.values = nn::Matrix::Ones(3, 128);
  const auto padded = extract_patches(tiny);
  CHECK(padded.grid.padded_frames == 16);
  CHECK(padded.patches(0, 3) == 0.0);
  CHECK(padded.patches(0, 2) == 1.0);
}

TEST_CASE("spectrogram cache round-trips exactly") {
  const auto s = log_mel_spectrogram(tone(700.0, 0.3));
  const auto path = std::filesystem::temp_directory_path() / "mmkd_spec.f32";
  write_spectrogram_cache(path, s);
  CHECK(read_spectrogram_cache(path).values == s.values);
  CHECK(std::filesystem::file_size(path) == 8 + 4 * static_cast<std::uintmax_t>(s.values.size()));
  std::filesystem::remove(path);
}

TEST_CASE("audio table and duration report") {
  const auto ds = corpus::toy_dataset(6, 2);
  const auto table = build_audio_table(ds, ToneTtsBackend(1));
  CHECK(table.size() == 6);
  const auto rows = audio_duration_report(ds, table);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].count + rows[1].count == rows[2].count);
  CHECK(rows[2].min <= rows[2].avg);
  CHECK(rows[2].avg <= rows[2].max);
  CHECK(duration_report_json(rows).size() == 3);
}

TEST_CASE("audio teacher learns class-dependent tones") {
  std::vector<std::pair<std::string, std::string>> records;
  std::vector<std::size_t> labels;
  AudioTable table;
  for (int i = 0; i < 16; ++i) {
    const std::string id = "a" + std::to_string(i);
    records.emplace_back(id, "tone");
    labels.push_back(static_cast<std::size_t>(i % 2));
    const double hz = (i % 2 == 0 ? 400.0 : 3000.0) + 20.0 * i;
    table.emplace(id, log_mel_spectrogram(tone(hz, 0.3 + 0.01 * i)));
  }
  const auto ds = corpus::make_dataset("tones", {"low", "high"}, records, labels, corpus::KFold{2});
  corpus::Fold fold;
  for (const auto& p : ds.posts) fold.train.push_back(p.id);

  AudioTeacherConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 25;
  cfg.batch_size = 4;
  cfg.dropout = 0.1;
  cfg.seed = 5;
  const auto trained = train_audio_teacher(ds, table, fold, cfg);
  CHECK(evaluate_teacher(*trained.teacher, ds, fold.train).accuracy == 1.0);
  for (const auto& p : ds.posts) {
    const auto pr = trained.teacher->predict_proba(p);
    CHECK(std::accumulate(pr.begin(), pr.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Normalization is applied exactly once on the way into the model.
  const auto& raw = table.at("a3");
  const auto once = extract_patches(normalize_spectrogram(raw, trained.teacher->norm_stats()));
  const auto twice = extract_patches(normalize_spectrogram(
      normalize_spectrogram(raw, trained.teacher->norm_stats()), trained.teacher->norm_stats()));
  CHECK(trained.teacher->features("a3").patches == once.patches);
  CHECK(trained.teacher->features("a3").patches != twice.patches);

  const auto dir = std::filesystem::temp_directory_path() / "mmkd_audio_teacher";
  std::filesystem::remove_all(dir);
  trained.teacher->save(dir);
  const auto back = AudioTeacher::load(dir);
  CHECK(back.checksum() == trained.teacher->checksum());
  CHECK(back.predict_proba(ds.posts[1]) == trained.teacher->predict_proba(ds.posts[1]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("default-grid audio configuration is accepted") {
  AudioTeacherConfig cfg;
  cfg.layers = 8;
  cfg.heads = 4;
  cfg.plateau_patience = 4;
  cfg.plateau_factor = 0.5;
  CHECK_NOTHROW(experiment::require_in_space(
      experiment::audio_teacher_space(),
      {{"layers", cfg.layers}, {"heads", cfg.heads}, {"patience", 4}, {"factor", 0.5},
       {"lr", cfg.lr}, {"dropout", cfg.dropout}}));
  CHECK_NOTHROW(AudioTeacher({}, {0.0, 1.0, "x"}, cfg, {"a", "b", "c"}));
  cfg.patch_size = 256;
  CHECK(kind_of([&] { AudioTeacher({}, {0.0, 1.0, "x"}, cfg, {"a", "b"}); }) ==
        ErrorKind::kInvalidPatchGrid);
}
