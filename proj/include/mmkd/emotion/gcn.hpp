#pragma once

#include "mmkd/emotion/embedding_table.hpp"
#include "mmkd/emotion/graph.hpp"
#include "mmkd/emotion/lexicon.hpp"
#include "mmkd/nn/layers.hpp"
#include "mmkd/nn/trainer.hpp"
#include "mmkd/text/encoder.hpp"

#include <memory>
#include <vector>

namespace mmkd::emotion {

struct GcnConfig {
  Eigen::Index hidden = 16;
  int epochs = 100;
  int early_stop_patience = 10;
  double lr = 0.01;
  double weight_decay = 0.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

// Two graph-convolution layers: H = ReLU(Â X W1 + b1), Z = Â H W2 + b2.
class GcnModel {
 public:
  GcnModel(Eigen::Index in, Eigen::Index hidden, std::shared_ptr<const nn::SparseMatrix> adjacency,
           std::uint64_t seed, double dropout = 0.0);

  // Pre-activation second-layer states, nodes x 7.
  nn::Var forward(const nn::Var& features, const nn::ForwardMode& mode) const;
  // Mean sigmoid cross-entropy over the first targets.rows() (post) nodes.
  nn::Var loss(const nn::Var& features, const nn::Matrix& targets,
               const nn::ForwardMode& mode) const;

  const nn::Linear& layer1() const { return layer1_; }
  const nn::Linear& layer2() const { return layer2_; }
  const std::shared_ptr<const nn::SparseMatrix>& adjacency() const { return adjacency_; }
  void collect(nn::ParameterList& out) const;

 private:
  nn::Linear layer1_, layer2_;
  std::shared_ptr<const nn::SparseMatrix> adjacency_;
  double dropout_;
};

// posts x 7 matrix of 0/1 targets.
nn::Matrix label_matrix(const std::vector<EmotionLabelSet>& labels);

struct TrainedGcn {
  GcnModel model;
  std::vector<nn::EpochLog> log;
};

// Full-batch training on every post node; early stopping monitors the
// full-graph loss. The graph must carry node features.
TrainedGcn train_emotion_gcn(const TextGraph& graph, const std::vector<EmotionLabelSet>& targets,
                             const GcnConfig& cfg);

// Second-layer states of every node keyed by TextGraph::node_key.
EmbeddingTable extract_emotion_embeddings(const GcnModel& model, const TextGraph& graph);

// Post rows of a node table, re-keyed by plain post id.
EmbeddingTable post_embeddings(const EmbeddingTable& nodes, const TextGraph& graph);

// Micro-averaged F1 of sigmoid scores thresholded at 0.5; 1 when there are
// neither positives nor predicted positives.
double multilabel_f1(const nn::Matrix& scores, const nn::Matrix& targets);

struct RefineConfig {
  int epochs = 3;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
};

struct RefinedEmbeddings {
  EmbeddingTable posts;  // post id -> encoder summary, 1 x d
  text::TextEncoder encoder;
  double f1_before = 0.0;
  double f1_after = 0.0;
  std::vector<nn::EpochLog> log;
};

// Fixed 7 x width Gaussian projector seeded by `seed`.
nn::Matrix emotion_projector(Eigen::Index width, std::uint64_t seed);

// Re-initializes the encoder's token rows from projected GCN token states,
// fine-tunes encoder + linear head on the 7-way multi-label task, and
// returns the fine-tuned per-post summaries.
RefinedEmbeddings refine_with_encoder(const EmbeddingTable& node_states,
                                      const corpus::Dataset& dataset, const TextGraph& graph,
                                      const std::vector<EmotionLabelSet>& targets,
                                      text::TextEncoder encoder, const RefineConfig& cfg);

}  // namespace mmkd::emotion
