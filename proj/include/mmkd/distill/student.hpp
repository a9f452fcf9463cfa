#pragma once

#include "mmkd/audio/audio_teacher.hpp"
#include "mmkd/corpus/corpus.hpp"
#include "mmkd/distill/teacher_cache.hpp"
#include "mmkd/emotion/embedding_table.hpp"
#include "mmkd/eval/metrics.hpp"
#include "mmkd/nn/trainer.hpp"
#include "mmkd/text/classifier.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace mmkd::distill {

enum class FusionMode { kTextOnly, kEmotion, kAudio, kBoth };

// "text-only", "+emotion", "+audio", "+both".
std::string_view fusion_mode_name(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);
std::vector<FusionMode> all_fusion_modes();
bool uses_emotion(FusionMode mode);
bool uses_audio(FusionMode mode);

// Linear map from [summary ; extras] back to the text width.
nn::Linear make_fusion_projector(Eigen::Index text_width, Eigen::Index emotion_width,
                                 Eigen::Index audio_width, FusionMode mode, std::mt19937_64& rng);

// Text-only returns `text_states` itself. Other modes append the active
// extra vectors to the summary row (row 0), project it back to the text
// width and leave the token rows untouched. MissingModality when an active
// vector or the projector is absent.
nn::Var fuse_student_inputs(const nn::Var& text_states, const std::optional<nn::RowVector>& emotion,
                            const std::optional<nn::RowVector>& audio, FusionMode mode,
                            const nn::Linear* projector);

struct DistillConfig {
  double lambda_task = 1.0;
  double lambda_kd = 1.0;
  double temperature = 1.0;
  std::vector<Modality> teacher_set = {Modality::kText, Modality::kEmotion, Modality::kAudio};
  int epochs = 5;
  double lr = 4e-5;
  double weight_decay = 0.0;
  std::size_t batch_size = 8;
  int early_stop_patience = 0;
  text::HeadConfig head;
  FusionMode fusion = FusionMode::kTextOnly;
  // Replace the pretrained backbone with a randomly initialised one.
  bool vanilla = false;
  // Fused-input students keep the distillation term unless this is cleared.
  bool use_kd = true;
  std::uint64_t seed = 0;
  bool allow_out_of_space = false;
};

void to_json(nlohmann::json& j, const DistillConfig& c);
void from_json(const nlohmann::json& j, DistillConfig& c);
// InvalidConfig for a bad temperature, lambdas or teacher set; RangeError
// for out-of-space values unless overridden.
void validate(const DistillConfig& cfg);

// Per-post extra vectors for fused-input students.
struct StudentInputs {
  std::optional<emotion::EmbeddingTable> emotion;
  std::optional<emotion::EmbeddingTable> audio;
};

// Summary vectors of the frozen audio teacher for every post.
emotion::EmbeddingTable audio_summaries(const audio::AudioTeacher& teacher,
                                        const corpus::Dataset& dataset);

class Student {
 public:
  Student(text::TextClassifier model, FusionMode mode, StudentInputs inputs,
          std::vector<std::string> classes, std::uint64_t seed);

  nn::Var logits(const corpus::Post& post, const nn::ForwardMode& mode) const;
  std::vector<double> predict_proba(const corpus::Post& post) const;

  FusionMode fusion() const { return fusion_; }
  const text::TextClassifier& model() const { return model_; }
  const std::optional<nn::Linear>& projector() const { return projector_; }
  const StudentInputs& inputs() const { return inputs_; }
  const std::vector<std::string>& classes() const { return classes_; }
  void collect(nn::ParameterList& out) const;
  std::string checksum() const;

  // `extra` is merged into the manifest (teacher set, lambdas, ...).
  void save(const std::filesystem::path& dir, const nlohmann::json& extra = {}) const;
  static Student load(const std::filesystem::path& dir);

 private:
  std::optional<nn::RowVector> extra_row(const std::optional<emotion::EmbeddingTable>& table,
                                         const std::string& id, const char* what) const;

  text::TextClassifier model_;
  FusionMode fusion_;
  StudentInputs inputs_;
  std::vector<std::string> classes_;
  std::uint64_t seed_;
  std::optional<nn::Linear> projector_;
};

// Same shape as the text teacher: backbone + transformer head. The vanilla
// variant swaps the backend for an unpretrained one seeded from cfg.seed.
Student build_student(const text::EncoderSpec& backend, const DistillConfig& cfg,
                      const corpus::Dataset& dataset, StudentInputs inputs = {});

eval::MetricsReport evaluate_student(const Student& student, const corpus::Dataset& dataset,
                                     const std::vector<std::string>& ids);

struct StepLog {
  int epoch = 0;
  std::size_t step = 0;
  double task = 0.0;
  double kd = 0.0;
  double total = 0.0;
};

struct StudentEpochLog {
  int epoch = 0;
  double task = 0.0;
  double kd = 0.0;
  double total = 0.0;
  double val_score = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainedStudent {
  std::shared_ptr<const Student> student;
  eval::MetricsReport validation;
  std::vector<StudentEpochLog> epochs;
  std::vector<StepLog> steps;
};

nlohmann::json student_log_json(const TrainedStudent& trained);

// Minimizes lambda_task * L_task + lambda_kd * L_kd per batch over the
// fold's training posts, with soft targets averaged over cfg.teacher_set.
TrainedStudent train_student(Student student, const corpus::Dataset& dataset,
                             const corpus::Fold& fold, const TeacherCache& cache,
                             const DistillConfig& cfg);

// Manifest fields recorded next to a trained student.
nlohmann::json student_manifest_extra(const DistillConfig& cfg);

}  // namespace mmkd::distill
