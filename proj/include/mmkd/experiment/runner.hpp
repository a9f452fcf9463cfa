#pragma once

#include "mmkd/audio/audio_teacher.hpp"
#include "mmkd/distill/student.hpp"
#include "mmkd/distill/teacher_cache.hpp"
#include "mmkd/emotion/emotion_teacher.hpp"
#include "mmkd/error.hpp"
#include "mmkd/eval/cross_validate.hpp"
#include "mmkd/experiment/config.hpp"
#include "mmkd/text/text_teacher.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>

namespace mmkd::experiment {

// Runs `f`, rethrowing mmkd errors as StageError(stage) unless they already
// carry a stage, and foreign exceptions as StageFailure.
template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorKind::kStageFailure, e.what()));
  }
}

struct TeacherRecord {
  Modality modality = Modality::kText;
  std::string key;        // content address inside the teacher store
  std::string checksum;
  bool reused = false;    // loaded from the store instead of trained
  std::filesystem::path dir;
};

struct FoldOutcome {
  std::vector<std::string> test_ids;
  std::vector<std::size_t> predictions;
  eval::MetricsReport train;  // student on its own training posts
  std::vector<TeacherRecord> teachers;
  std::string student_checksum;
  bool student_reused = false;
};

struct ExperimentResult {
  std::filesystem::path dir;
  eval::CrossValidation evaluation;
  std::vector<FoldOutcome> folds;
};

// Artifact layout under cfg.output_dir:
//   resolved_config.json, dataset_stats.json, splits.json
//   fold_<k>/teacher_outputs.json, fold_<k>/student/, fold_<k>/student_log.json
//   metrics.json, teachers.json
// Teachers live in the content-addressed store (cfg.teacher_store), audio
// features under <store>/audio-<key>/.
class ExperimentRunner {
 public:
  // Resolves and validates the config ("config" stage); nothing is trained.
  explicit ExperimentRunner(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  std::filesystem::path dir() const { return cfg_.output_dir; }

  const corpus::Dataset& dataset();
  const corpus::SplitPlan& plan();
  std::size_t fold_count();
  const emotion::EmotionLexicon& lexicon();
  const audio::AudioTable& audio_table();
  const emotion::EmotionFeatures& emotion_features();

  std::shared_ptr<const Teacher> teacher(Modality modality, std::size_t fold);
  const TeacherRecord& teacher_record(Modality modality, std::size_t fold);
  std::shared_ptr<const text::TextTeacher> text_teacher(std::size_t fold);
  std::shared_ptr<const emotion::EmotionTeacher> emotion_teacher(std::size_t fold);
  std::shared_ptr<const audio::AudioTeacher> audio_teacher(std::size_t fold);

  // Teacher outputs of every post for the configured teacher set.
  const distill::TeacherCache& teacher_outputs(std::size_t fold);
  std::shared_ptr<const distill::Student> student(std::size_t fold);
  FoldOutcome run_fold(std::size_t fold);

  // Whole pipeline; writes metrics.json and teachers.json.
  ExperimentResult run();

  // Trains on `fold` and scores the student on fold.val (used by search).
  eval::MetricsReport validate_fold(const corpus::Fold& fold);

 private:
  std::string teacher_key(Modality modality, const corpus::Fold& fold);
  const corpus::Fold& fold_at(std::size_t fold);
  std::filesystem::path fold_dir(std::size_t fold) const;
  std::shared_ptr<const Teacher> obtain_teacher(Modality modality, const corpus::Fold& fold,
                                                TeacherRecord& record);
  distill::StudentInputs student_inputs(const corpus::Fold& fold, std::size_t fold_index);
  std::shared_ptr<const distill::Student> train_student_for(const corpus::Fold& fold,
                                                            const distill::TeacherCache& cache,
                                                            const std::filesystem::path& out,
                                                            std::size_t fold_index,
                                                            bool& reused);

  ExperimentConfig cfg_;
  std::optional<corpus::Dataset> dataset_;
  std::optional<corpus::SplitPlan> plan_;
  std::optional<emotion::EmotionLexicon> lexicon_;
  std::optional<audio::AudioTable> audio_;
  std::optional<emotion::EmotionFeatures> emotion_;
  std::map<std::string, std::shared_ptr<const Teacher>> teachers_;
  std::map<std::string, bool> loaded_;  // key -> came from the store
  std::map<std::pair<int, std::size_t>, TeacherRecord> records_;
  std::map<std::size_t, distill::TeacherCache> caches_;
  std::map<std::size_t, std::shared_ptr<const distill::Student>> students_;
  std::map<std::size_t, bool> student_reused_;
};

// Convenience wrapper: ExperimentRunner(cfg).run().
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Stable digest of the dataset's ids, texts, labels and classes.
std::string dataset_fingerprint(const corpus::Dataset& dataset);

}  // namespace mmkd::experiment
