#pragma once

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/eval/metrics.hpp"
#include "mmkd/nn/trainer.hpp"
#include "mmkd/teacher.hpp"
#include "mmkd/text/classifier.hpp"

#include <filesystem>
#include <memory>

namespace mmkd::text {

class TextTeacher final : public Teacher {
 public:
  TextTeacher(TextClassifier model, std::vector<std::string> classes)
      : model_(std::move(model)), classes_(std::move(classes)) {}

  Modality modality() const override { return Modality::kText; }
  std::size_t num_classes() const override { return classes_.size(); }
  std::vector<double> predict_proba(const corpus::Post& post) const override {
    return model_.predict_proba(post);
  }
  std::string checksum() const override;

  const TextClassifier& model() const { return model_; }
  const std::vector<std::string>& classes() const { return classes_; }

  void save(const std::filesystem::path& dir) const;
  static TextTeacher load(const std::filesystem::path& dir);

 private:
  TextClassifier model_;
  std::vector<std::string> classes_;
};

// Backbone + head; the encoder vocabulary is the corpus vocabulary so the
// backbone's embedding rows are trainable.
TextTeacher build_text_teacher(const EncoderSpec& backend, const HeadConfig& head,
                               const corpus::Dataset& dataset, std::uint64_t seed);

struct FinetuneConfig {
  double lr = 4e-5;
  double weight_decay = 0.0;
  int epochs = 4;
  std::size_t batch_size = 8;
  int early_stop_patience = 0;
  std::uint64_t seed = 0;
  // Permit values outside the hyperparameter search space.
  bool allow_out_of_space = false;
};

void to_json(nlohmann::json& j, const FinetuneConfig& c);
void from_json(const nlohmann::json& j, FinetuneConfig& c);

struct TrainedTextTeacher {
  std::shared_ptr<const TextTeacher> teacher;
  eval::MetricsReport validation;
  std::vector<nn::EpochLog> log;
};

// Cross-entropy fine-tuning of backbone and head on the fold's training
// portion; the returned teacher is frozen.
TrainedTextTeacher finetune_teacher(TextTeacher teacher, const corpus::Dataset& dataset,
                                    const corpus::Fold& fold, const FinetuneConfig& cfg);

}  // namespace mmkd::text
