#pragma once

#include "mmkd/emotion/embedding_table.hpp"
#include "mmkd/emotion/gcn.hpp"
#include "mmkd/emotion/lexicon.hpp"
#include "mmkd/eval/metrics.hpp"
#include "mmkd/nn/layers.hpp"
#include "mmkd/teacher.hpp"

#include <filesystem>
#include <memory>

namespace mmkd::emotion {

struct EmotionTeacherConfig {
  int hidden_layers = 2;
  int hidden_dim = 400;
  double dropout = 0.1;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int epochs = 100;
  int early_stop_patience = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool allow_out_of_space = false;
};

void to_json(nlohmann::json& j, const EmotionTeacherConfig& c);
void from_json(const nlohmann::json& j, EmotionTeacherConfig& c);

// MLP over a fixed per-post embedding table. Posts without an embedding
// raise MissingModality.
class EmotionTeacher final : public Teacher {
 public:
  EmotionTeacher(EmbeddingTable embeddings, EmotionTeacherConfig cfg,
                 std::vector<std::string> classes);

  Modality modality() const override { return Modality::kEmotion; }
  std::size_t num_classes() const override { return classes_.size(); }
  std::vector<double> predict_proba(const corpus::Post& post) const override;
  std::string checksum() const override;

  nn::Var logits(const nn::RowVector& embedding, const nn::ForwardMode& mode) const;
  const EmbeddingTable& embeddings() const { return embeddings_; }
  const EmotionTeacherConfig& config() const { return cfg_; }
  const std::vector<std::string>& classes() const { return classes_; }
  void collect(nn::ParameterList& out) const { mlp_.collect(out); }

  void save(const std::filesystem::path& dir) const;
  static EmotionTeacher load(const std::filesystem::path& dir);

 private:
  EmbeddingTable embeddings_;
  EmotionTeacherConfig cfg_;
  std::vector<std::string> classes_;
  nn::Mlp mlp_;
};

struct TrainedEmotionTeacher {
  std::shared_ptr<const EmotionTeacher> teacher;
  eval::MetricsReport validation;
  std::vector<nn::EpochLog> log;
};

// Cross-entropy training on the fold's training posts; early stopping on
// validation weighted F1 when the fold has a validation portion.
TrainedEmotionTeacher train_emotion_teacher(EmbeddingTable embeddings,
                                            const corpus::Dataset& dataset,
                                            const corpus::Fold& fold,
                                            const EmotionTeacherConfig& cfg);

struct EmotionPipelineConfig {
  int window = 20;
  GcnConfig gcn;
  RefineConfig refine;
  // false: feed the raw GCN post states to the MLP instead.
  bool refine_with_encoder = true;
};

void to_json(nlohmann::json& j, const EmotionPipelineConfig& c);
void from_json(const nlohmann::json& j, EmotionPipelineConfig& c);

struct EmotionFeatures {
  TextGraph graph;
  std::vector<EmotionLabelSet> labels;
  EmbeddingTable node_states;
  EmbeddingTable post_embeddings;
  double refine_f1_before = 0.0;
  double refine_f1_after = 0.0;
};

// Lexicon labels -> graph -> node features -> GCN -> (refined) post
// embeddings. Uses only the lexicon, never the gold labels.
EmotionFeatures prepare_emotion_features(const corpus::Dataset& dataset,
                                         const EmotionLexicon& lexicon,
                                         const text::EncoderSpec& backend,
                                         const EmotionPipelineConfig& cfg);

}  // namespace mmkd::emotion
