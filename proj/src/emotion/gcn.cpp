#include "mmkd/emotion/gcn.hpp"

#include "mmkd/error.hpp"

#include <cmath>
#include <random>

namespace mmkd::emotion {

GcnModel::GcnModel(Eigen::Index in, Eigen::Index hidden,
                   std::shared_ptr<const nn::SparseMatrix> adjacency, std::uint64_t seed,
                   double dropout)
    : adjacency_(std::move(adjacency)), dropout_(dropout) {
  std::mt19937_64 rng(seed);
  layer1_ = nn::Linear(in, hidden, rng);
  layer2_ = nn::Linear(hidden, static_cast<Eigen::Index>(kNumEmotions), rng);
}

nn::Var GcnModel::forward(const nn::Var& features, const nn::ForwardMode& mode) const {
  const nn::Var x = nn::dropout(features, dropout_, mode);
  nn::Var h = nn::add_row(nn::spmm(adjacency_, nn::matmul(x, layer1_.weight())), layer1_.bias());
  h = nn::dropout(nn::relu(h), dropout_, mode);
  return nn::add_row(nn::spmm(adjacency_, nn::matmul(h, layer2_.weight())), layer2_.bias());
}

nn::Var GcnModel::loss(const nn::Var& features, const nn::Matrix& targets,
                       const nn::ForwardMode& mode) const {
  const nn::Var z = forward(features, mode);
  return nn::bce_with_logits(nn::slice_rows(z, 0, targets.rows()), targets);
}

void GcnModel::collect(nn::ParameterList& out) const {
  layer1_.collect(out);
  layer2_.collect(out);
}

nn::Matrix label_matrix(const std::vector<EmotionLabelSet>& labels) {
  nn::Matrix m(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(kNumEmotions));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t e = 0; e < kNumEmotions; ++e) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e)) = labels[i].test(e) ? 1.0 : 0.0;
    }
  }
  return m;
}

TrainedGcn train_emotion_gcn(const TextGraph& graph, const std::vector<EmotionLabelSet>& targets,
                             const GcnConfig& cfg) {
  if (targets.size() != graph.num_posts()) {
    throw Error(ErrorKind::kLengthMismatch, "emotion targets must cover every post node");
  }
  if (graph.features.rows() != static_cast<Eigen::Index>(graph.num_nodes())) {
    throw Error(ErrorKind::kInvalidConfig, "graph node features are not initialized");
  }
  TrainedGcn out{GcnModel(graph.features.cols(), cfg.hidden, normalized_adjacency(graph), cfg.seed,
                          cfg.dropout),
                 {}};
  const nn::Var x = nn::Var::constant(graph.features);
  const nn::Matrix y = label_matrix(targets);
  nn::ParameterList params;
  out.model.collect(params);

  nn::TrainLoopConfig loop;
  loop.epochs = cfg.epochs;
  loop.batch_size = 1;
  loop.lr = cfg.lr;
  loop.weight_decay = cfg.weight_decay;
  loop.early_stop_patience = cfg.early_stop_patience;
  loop.seed = cfg.seed;
  const auto batch_loss = [&](std::span<const std::size_t>, const nn::ForwardMode& mode) {
    return out.model.loss(x, y, mode);
  };
  const auto validate = [&]() {
    const double l = out.model.loss(x, y, {}).scalar();
    return nn::Validation{-l, l};
  };
  out.log = nn::run_training(params, loop, 1, batch_loss, validate);
  return out;
}

EmbeddingTable extract_emotion_embeddings(const GcnModel& model, const TextGraph& graph) {
  std::vector<std::string> keys;
  keys.reserve(graph.num_nodes());
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) keys.push_back(graph.node_key(i));
  return EmbeddingTable(std::move(keys),
                        model.forward(nn::Var::constant(graph.features), {}).value());
}

EmbeddingTable post_embeddings(const EmbeddingTable& nodes, const TextGraph& graph) {
  nn::Matrix rows(static_cast<Eigen::Index>(graph.num_posts()), nodes.width());
  for (std::size_t p = 0; p < graph.num_posts(); ++p) {
    rows.row(static_cast<Eigen::Index>(p)) = nodes.row(graph.node_key(p));
  }
  return EmbeddingTable(graph.post_nodes, std::move(rows));
}

double multilabel_f1(const nn::Matrix& scores, const nn::Matrix& targets) {
  double tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool pred = scores.data()[i] > 0.5;
    const bool gold = targets.data()[i] > 0.5;
    tp += pred && gold ? 1 : 0;
    fp += pred && !gold ? 1 : 0;
    fn += !pred && gold ? 1 : 0;
  }
  const double denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2 * tp / denom;
}

nn::Matrix emotion_projector(Eigen::Index width, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x70e3c7u);
  return nn::gaussian(static_cast<Eigen::Index>(kNumEmotions), width,
                      1.0 / std::sqrt(static_cast<double>(kNumEmotions)), rng);
}

RefinedEmbeddings refine_with_encoder(const EmbeddingTable& node_states,
                                      const corpus::Dataset& dataset, const TextGraph& graph,
                                      const std::vector<EmotionLabelSet>& targets,
                                      text::TextEncoder encoder, const RefineConfig& cfg) {
  if (targets.size() != graph.num_posts()) {
    throw Error(ErrorKind::kLengthMismatch, "emotion targets must cover every post node");
  }
  const nn::Matrix projector = emotion_projector(encoder.spec().width, cfg.seed);
  for (const auto& tok : graph.token_nodes) {
    const std::string key = "token:" + tok;
    if (encoder.has_token(tok) && node_states.contains(key)) {
      encoder.set_token_row(tok, node_states.row(key) * projector);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  const nn::Linear head(encoder.spec().width, static_cast<Eigen::Index>(kNumEmotions), rng);
  const nn::Matrix y = label_matrix(targets);
  std::vector<const corpus::Post*> posts;
  for (const auto& id : graph.post_nodes) posts.push_back(&dataset.post(id));

  const auto scores = [&]() {
    nn::Matrix s(y.rows(), y.cols());
    for (std::size_t i = 0; i < posts.size(); ++i) {
      s.row(static_cast<Eigen::Index>(i)) =
          nn::sigmoid(head.forward(encoder.encode(posts[i]->text).summary)).value();
    }
    return s;
  };

  RefinedEmbeddings out;
  out.f1_before = multilabel_f1(scores(), y);

  nn::ParameterList params;
  encoder.collect(params);
  head.collect(params);
  nn::TrainLoopConfig loop;
  loop.epochs = cfg.epochs;
  loop.batch_size = cfg.batch_size;
  loop.lr = cfg.lr;
  loop.seed = cfg.seed;
  const auto batch_loss = [&](std::span<const std::size_t> batch, const nn::ForwardMode&) {
    std::vector<nn::Var> rows;
    nn::Matrix t(static_cast<Eigen::Index>(batch.size()), y.cols());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      rows.push_back(head.forward(encoder.encode(posts[batch[k]]->text).summary));
      t.row(static_cast<Eigen::Index>(k)) = y.row(static_cast<Eigen::Index>(batch[k]));
    }
    return nn::bce_with_logits(nn::concat_rows(rows), t);
  };
  out.log = nn::run_training(params, loop, posts.size(), batch_loss, nullptr);
  out.f1_after = multilabel_f1(scores(), y);

  nn::Matrix summaries(static_cast<Eigen::Index>(posts.size()), encoder.spec().width);
  for (std::size_t i = 0; i < posts.size(); ++i) {
    summaries.row(static_cast<Eigen::Index>(i)) = encoder.encode(posts[i]->text).summary.value();
  }
  out.posts = EmbeddingTable(graph.post_nodes, std::move(summaries));
  out.encoder = std::move(encoder);
  return out;
}

}  // namespace mmkd::emotion
