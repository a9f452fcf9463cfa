#include "mmkd/emotion/emotion_teacher.hpp"

#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/nn/optim.hpp"
#include "mmkd/text/classifier.hpp"

#include <cmath>
#include <random>

namespace mmkd::emotion {

void to_json(nlohmann::json& j, const EmotionTeacherConfig& c) {
  j = {{"hidden_layers", c.hidden_layers}, {"hidden_dim", c.hidden_dim},
       {"dropout", c.dropout},             {"lr", c.lr},
       {"weight_decay", c.weight_decay},   {"epochs", c.epochs},
       {"early_stop_patience", c.early_stop_patience},
       {"batch_size", c.batch_size},       {"seed", c.seed},
       {"allow_out_of_space", c.allow_out_of_space}};
}

void from_json(const nlohmann::json& j, EmotionTeacherConfig& c) {
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.allow_out_of_space = j.value("allow_out_of_space", c.allow_out_of_space);
}

void to_json(nlohmann::json& j, const EmotionPipelineConfig& c) {
  j = {{"window", c.window},
       {"gcn",
        {{"hidden", c.gcn.hidden},
         {"epochs", c.gcn.epochs},
         {"early_stop_patience", c.gcn.early_stop_patience},
         {"lr", c.gcn.lr},
         {"weight_decay", c.gcn.weight_decay},
         {"dropout", c.gcn.dropout},
         {"seed", c.gcn.seed}}},
       {"refine",
        {{"epochs", c.refine.epochs},
         {"lr", c.refine.lr},
         {"batch_size", c.refine.batch_size},
         {"seed", c.refine.seed}}},
       {"refine_with_encoder", c.refine_with_encoder}};
}

void from_json(const nlohmann::json& j, EmotionPipelineConfig& c) {
  c.window = j.value("window", c.window);
  if (j.contains("gcn")) {
    const auto& g = j.at("gcn");
    c.gcn.hidden = g.value("hidden", c.gcn.hidden);
    c.gcn.epochs = g.value("epochs", c.gcn.epochs);
    c.gcn.early_stop_patience = g.value("early_stop_patience", c.gcn.early_stop_patience);
    c.gcn.lr = g.value("lr", c.gcn.lr);
    c.gcn.weight_decay = g.value("weight_decay", c.gcn.weight_decay);
    c.gcn.dropout = g.value("dropout", c.gcn.dropout);
    c.gcn.seed = g.value("seed", c.gcn.seed);
  }
  if (j.contains("refine")) {
    const auto& r = j.at("refine");
    c.refine.epochs = r.value("epochs", c.refine.epochs);
    c.refine.lr = r.value("lr", c.refine.lr);
    c.refine.batch_size = r.value("batch_size", c.refine.batch_size);
    c.refine.seed = r.value("seed", c.refine.seed);
  }
  c.refine_with_encoder = j.value("refine_with_encoder", c.refine_with_encoder);
}

EmotionTeacher::EmotionTeacher(EmbeddingTable embeddings, EmotionTeacherConfig cfg,
                               std::vector<std::string> classes)
    : embeddings_(std::move(embeddings)), cfg_(cfg), classes_(std::move(classes)) {
  std::mt19937_64 rng(cfg_.seed);
  mlp_ = nn::Mlp(embeddings_.width(), cfg_.hidden_layers, cfg_.hidden_dim,
                 static_cast<Eigen::Index>(classes_.size()), cfg_.dropout, rng);
}

nn::Var EmotionTeacher::logits(const nn::RowVector& embedding, const nn::ForwardMode& mode) const {
  return mlp_.forward(nn::Var::constant(embedding), mode);
}

std::vector<double> EmotionTeacher::predict_proba(const corpus::Post& post) const {
  if (!embeddings_.contains(post.id)) {
    throw Error(ErrorKind::kMissingModality, "no emotion embedding for post " + post.id);
  }
  return text::softmax(logits(embeddings_.row(post.id), {}).value());
}

std::string EmotionTeacher::checksum() const {
  nn::ParameterList params;
  mlp_.collect(params);
  params.push_back(nn::Var::constant(embeddings_.values()));
  return nn::checksum(params);
}

void EmotionTeacher::save(const std::filesystem::path& dir) const {
  nn::ParameterList params;
  mlp_.collect(params);
  params.push_back(nn::Var::constant(embeddings_.values()));
  nlohmann::json manifest = {{"kind", "emotion-teacher"},
                             {"classes", classes_},
                             {"config", cfg_},
                             {"embedding_keys", embeddings_.keys()},
                             {"embedding_width", embeddings_.width()}};
  nn::write_checkpoint(dir, std::move(manifest), params);
}

EmotionTeacher EmotionTeacher::load(const std::filesystem::path& dir) {
  const auto ckpt = nn::read_checkpoint(dir);
  const auto& m = ckpt.manifest;
  if (m.value("kind", "") != "emotion-teacher") {
    throw Error(ErrorKind::kIoError, dir.string() + " is not an emotion-teacher checkpoint");
  }
  auto keys = m.at("embedding_keys").get<std::vector<std::string>>();
  const auto width = m.at("embedding_width").get<Eigen::Index>();
  nn::Var table = nn::Var::constant(nn::Matrix::Zero(static_cast<Eigen::Index>(keys.size()), width));
  EmotionTeacher t(EmbeddingTable(keys, table.value()), m.at("config").get<EmotionTeacherConfig>(),
                   m.at("classes").get<std::vector<std::string>>());
  nn::ParameterList params;
  t.mlp_.collect(params);
  params.push_back(table);
  nn::restore(params, ckpt.params);
  t.embeddings_ = EmbeddingTable(std::move(keys), table.value());
  return t;
}

TrainedEmotionTeacher train_emotion_teacher(EmbeddingTable embeddings,
                                            const corpus::Dataset& dataset,
                                            const corpus::Fold& fold,
                                            const EmotionTeacherConfig& cfg) {
  if (!cfg.allow_out_of_space) {
    experiment::require_in_space(experiment::emotion_teacher_space(),
                                 {{"dropout", cfg.dropout},
                                  {"hidden_layers", cfg.hidden_layers},
                                  {"hidden_dim", cfg.hidden_dim},
                                  {"lr", cfg.lr},
                                  {"weight_decay", cfg.weight_decay}});
  }
  for (const auto* part : {&fold.train, &fold.val}) {
    for (const auto& id : *part) {
      if (!embeddings.contains(id)) {
        throw Error(ErrorKind::kMissingModality, "no emotion embedding for post " + id);
      }
    }
  }
  auto teacher = std::make_shared<EmotionTeacher>(std::move(embeddings), cfg, dataset.classes);
  const auto train = dataset.indices_of(fold.train);
  const auto val = dataset.indices_of(fold.val);

  nn::ParameterList params;
  teacher->collect(params);
  nn::TrainLoopConfig loop;
  loop.epochs = cfg.epochs;
  loop.batch_size = cfg.batch_size;
  loop.lr = cfg.lr;
  loop.weight_decay = cfg.weight_decay;
  loop.early_stop_patience = val.empty() ? 0 : cfg.early_stop_patience;
  loop.seed = cfg.seed;

  const auto batch_loss = [&](std::span<const std::size_t> batch, const nn::ForwardMode& mode) {
    nn::Var total;
    for (auto b : batch) {
      const auto& post = dataset.posts[train[b]];
      const nn::Var lp =
          nn::log_softmax_rows(teacher->logits(teacher->embeddings().row(post.id), mode));
      const nn::Var nll = nn::scale(nn::pick(lp, 0, static_cast<Eigen::Index>(post.label)), -1.0);
      total = total.defined() ? nn::add(total, nll) : nll;
    }
    return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
  };
  nn::Validate validate;
  if (!val.empty()) {
    validate = [&]() {
      std::vector<std::size_t> truth, pred;
      double loss = 0.0;
      for (auto i : val) {
        const auto p = teacher->predict_proba(dataset.posts[i]);
        truth.push_back(dataset.posts[i].label);
        pred.push_back(eval::argmax(p));
        loss -= std::log(std::max(p[dataset.posts[i].label], 1e-12));
      }
      return nn::Validation{eval::confusion_metrics(truth, pred, dataset.classes).weighted_f1,
                            loss / static_cast<double>(val.size())};
    };
  }

  TrainedEmotionTeacher out;
  out.log = nn::run_training(params, loop, train.size(), batch_loss, validate);
  out.teacher = teacher;
  out.validation = evaluate_teacher(*teacher, dataset, fold.val);
  return out;
}

EmotionFeatures prepare_emotion_features(const corpus::Dataset& dataset,
                                         const EmotionLexicon& lexicon,
                                         const text::EncoderSpec& backend,
                                         const EmotionPipelineConfig& cfg) {
  EmotionFeatures f;
  f.labels = assign_emotions(dataset, lexicon);
  f.graph = build_graph(dataset, cfg.window);
  text::TextEncoder encoder(backend, f.graph.token_nodes);
  f.graph.features = init_node_features(dataset, f.graph, encoder);
  const auto gcn = train_emotion_gcn(f.graph, f.labels, cfg.gcn);
  f.node_states = extract_emotion_embeddings(gcn.model, f.graph);
  if (cfg.refine_with_encoder) {
    auto refined =
        refine_with_encoder(f.node_states, dataset, f.graph, f.labels, std::move(encoder), cfg.refine);
    f.post_embeddings = std::move(refined.posts);
    f.refine_f1_before = refined.f1_before;
    f.refine_f1_after = refined.f1_after;
  } else {
    f.post_embeddings = post_embeddings(f.node_states, f.graph);
  }
  return f;
}

}  // namespace mmkd::emotion
