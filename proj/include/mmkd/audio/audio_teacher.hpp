#pragma once

#include "mmkd/audio/features.hpp"
#include "mmkd/audio/tts.hpp"
#include "mmkd/corpus/corpus.hpp"
#include "mmkd/eval/metrics.hpp"
#include "mmkd/nn/layers.hpp"
#include "mmkd/nn/trainer.hpp"
#include "mmkd/teacher.hpp"

#include <filesystem>
#include <map>
#include <memory>

namespace mmkd::audio {

// Post id -> raw (unnormalized) log-Mel spectrogram.
using AudioTable = std::map<std::string, Spectrogram>;

// Chunks, synthesizes and featurizes every post. When `wav_dir` is given,
// one <id>.wav per post is written there.
AudioTable build_audio_table(const corpus::Dataset& dataset, const TtsBackend& backend,
                             const std::filesystem::path& wav_dir = {});

void save_audio_table(const AudioTable& table, const std::filesystem::path& dir);
AudioTable load_audio_table(const std::filesystem::path& dir);

struct DurationSummary {
  std::string name;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;
};

// Per-class audio durations in seconds, then the overall row.
std::vector<DurationSummary> audio_duration_report(const corpus::Dataset& dataset,
                                                   const AudioTable& table);
nlohmann::json duration_report_json(const std::vector<DurationSummary>& rows);

struct AudioTeacherConfig {
  int patch_size = 16;
  int overlap = -1;  // -1: default_overlap(patch_size)
  Eigen::Index width = 24;
  int layers = 2;
  int heads = 2;
  double dropout = 0.1;
  double lr = 1e-4;
  double weight_decay = 0.0;
  int epochs = 25;
  int early_stop_patience = 5;
  int plateau_patience = 4;
  double plateau_factor = 0.5;
  std::size_t batch_size = 8;
  Eigen::Index max_frames = 512;
  std::uint64_t seed = 0;
  bool allow_out_of_space = false;
};

void to_json(nlohmann::json& j, const AudioTeacherConfig& c);
void from_json(const nlohmann::json& j, AudioTeacherConfig& c);

// Patch projection + learned frequency/time position embeddings + a
// prepended summary token, a transformer encoder, and a sigmoid head whose
// scores are renormalized into a distribution.
class AudioTeacher final : public Teacher {
 public:
  AudioTeacher(AudioTable table, NormStats stats, AudioTeacherConfig cfg,
               std::vector<std::string> classes);

  Modality modality() const override { return Modality::kAudio; }
  std::size_t num_classes() const override { return classes_.size(); }
  std::vector<double> predict_proba(const corpus::Post& post) const override;
  std::string checksum() const override;

  // Truncated, normalized, patched input of one post.
  PatchSequence features(const std::string& post_id) const;
  nn::Var logits(const PatchSequence& patches, const nn::ForwardMode& mode) const;
  nn::Var summary(const PatchSequence& patches, const nn::ForwardMode& mode) const;

  const AudioTable& table() const { return table_; }
  const NormStats& norm_stats() const { return stats_; }
  const AudioTeacherConfig& config() const { return cfg_; }
  const std::vector<std::string>& classes() const { return classes_; }
  void collect(nn::ParameterList& out) const;

  void save(const std::filesystem::path& dir) const;
  static AudioTeacher load(const std::filesystem::path& dir);

 private:
  AudioTable table_;
  NormStats stats_;
  AudioTeacherConfig cfg_;
  std::vector<std::string> classes_;
  PatchGrid max_grid_;
  nn::Linear projection_;
  nn::Var cls_;
  nn::Var freq_pos_;
  nn::Var time_pos_;
  nn::TransformerEncoder encoder_;
  nn::Linear head_;
};

struct TrainedAudioTeacher {
  std::shared_ptr<const AudioTeacher> teacher;
  eval::MetricsReport validation;
  std::vector<nn::EpochLog> log;
};

// Normalization statistics come from the fold's training posts only.
// Sigmoid cross-entropy against one-hot targets, early stopping on
// validation weighted F1 and plateau LR reduction on validation loss.
TrainedAudioTeacher train_audio_teacher(const corpus::Dataset& dataset, const AudioTable& table,
                                        const corpus::Fold& fold, const AudioTeacherConfig& cfg);

}  // namespace mmkd::audio
