#pragma once

#include "mmkd/audio/audio_teacher.hpp"
#include "mmkd/corpus/corpus.hpp"
#include "mmkd/distill/student.hpp"
#include "mmkd/emotion/emotion_teacher.hpp"
#include "mmkd/text/text_teacher.hpp"

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace mmkd::experiment {

inline constexpr const char* kArtifactRootEnv = "MMKD_ARTIFACT_ROOT";

// Either a line-delimited JSON file or the built-in synthetic corpus.
struct DatasetRef {
  std::string path;
  std::string name;
  std::string protocol;  // overrides the sidecar manifest when non-empty
  bool toy = false;
  std::size_t toy_posts = 40;
  std::uint64_t toy_seed = 7;
};

struct ExperimentConfig {
  DatasetRef dataset;
  std::string text_backend = "toy-deterministic";
  // 0 keeps the backend's native width.
  Eigen::Index text_width = 0;
  std::string tts_backend = "toy-tone";
  // Path to a term<TAB>emotions file, or "toy" for the built-in lexicon.
  std::string lexicon = "toy";
  text::HeadConfig text_head;
  text::FinetuneConfig text_finetune;
  emotion::EmotionPipelineConfig emotion_pipeline;
  emotion::EmotionTeacherConfig emotion_teacher;
  audio::AudioTeacherConfig audio_teacher;
  // Carries teacher_set, lambdas, temperature and the student head.
  distill::DistillConfig student;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "run";
  // Content-addressed teacher checkpoints; empty -> <output_dir>/teacher_store.
  std::string teacher_store;
  // 0 runs every fold of the split plan.
  std::size_t max_folds = 0;
  bool allow_out_of_space = false;
  bool resume = true;
};

// Missing keys keep their defaults. Unknown top-level keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fills every derived field: block seeds from the experiment seed, the
// override flag into every block, absolute output paths. InvalidConfig
// when the seed is missing.
ExperimentConfig resolve(ExperimentConfig cfg);

// Relative paths are placed under $MMKD_ARTIFACT_ROOT when it is set.
std::filesystem::path artifact_path(const std::string& path);

// Rejects out-of-space hyperparameters (unless overridden), unknown
// backends and an unreadable lexicon without training anything.
void validate_config(const ExperimentConfig& cfg);

text::EncoderSpec text_backend_spec(const ExperimentConfig& cfg);
// Settings that train every block on the synthetic corpus in seconds:
// toy encoder, short schedules, learning rates above the search-space grids
// (allow_out_of_space is set), 64-frame audio crops and a single fold.
ExperimentConfig toy_experiment(std::size_t posts = 40, std::uint64_t seed = 7,
                                std::string output_dir = "run");

// Overlaps a student search assignment onto the student block.
void apply_student_assignment(ExperimentConfig& cfg, const nlohmann::json& assignment);

}  // namespace mmkd::experiment
