#include "mmkd/text/text_teacher.hpp"

#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/nn/optim.hpp"

#include <cmath>

namespace mmkd::text {

namespace {

std::vector<std::string> corpus_texts(const corpus::Dataset& ds) {
  std::vector<std::string> texts;
  texts.reserve(ds.posts.size());
  for (const auto& p : ds.posts) texts.push_back(p.text);
  return texts;
}

}  // namespace

std::string TextTeacher::checksum() const {
  nn::ParameterList params;
  model_.collect(params);
  return nn::checksum(params);
}

void TextTeacher::save(const std::filesystem::path& dir) const {
  nlohmann::json manifest = {{"kind", "text-teacher"},
                             {"backend", model_.encoder().spec()},
                             {"head", model_.head_config()},
                             {"classes", classes_},
                             {"seed", model_.seed()},
                             {"vocabulary", model_.encoder().vocabulary()}};
  nn::ParameterList params;
  model_.collect(params);
  nn::write_checkpoint(dir, std::move(manifest), params);
}

TextTeacher TextTeacher::load(const std::filesystem::path& dir) {
  const auto ckpt = nn::read_checkpoint(dir);
  const auto& m = ckpt.manifest;
  if (m.value("kind", "") != "text-teacher") {
    throw Error(ErrorKind::kIoError, dir.string() + " is not a text-teacher checkpoint");
  }
  TextEncoder encoder(m.at("backend").get<EncoderSpec>(),
                      m.at("vocabulary").get<std::vector<std::string>>());
  auto classes = m.at("classes").get<std::vector<std::string>>();
  TextClassifier model(std::move(encoder), m.at("head").get<HeadConfig>(), classes.size(),
                       m.at("seed").get<std::uint64_t>());
  nn::ParameterList params;
  model.collect(params);
  nn::restore(params, ckpt.params);
  return TextTeacher(std::move(model), std::move(classes));
}

void to_json(nlohmann::json& j, const FinetuneConfig& c) {
  j = {{"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"early_stop_patience", c.early_stop_patience},
       {"seed", c.seed},
       {"allow_out_of_space", c.allow_out_of_space}};
}

void from_json(const nlohmann::json& j, FinetuneConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  c.allow_out_of_space = j.value("allow_out_of_space", c.allow_out_of_space);
}

TextTeacher build_text_teacher(const EncoderSpec& backend, const HeadConfig& head,
                               const corpus::Dataset& dataset, std::uint64_t seed) {
  validate_head(head, backend.width);
  TextEncoder encoder(backend, build_vocabulary(corpus_texts(dataset)));
  return TextTeacher(TextClassifier(std::move(encoder), head, dataset.classes.size(), seed),
                     dataset.classes);
}

TrainedTextTeacher finetune_teacher(TextTeacher teacher, const corpus::Dataset& dataset,
                                    const corpus::Fold& fold, const FinetuneConfig& cfg) {
  if (!cfg.allow_out_of_space) {
    const auto& head = teacher.model().head_config();
    experiment::require_in_space(experiment::text_teacher_space(),
                                 {{"dropout", head.dropout},
                                  {"layers", head.layers},
                                  {"heads", head.heads},
                                  {"lr", cfg.lr},
                                  {"weight_decay", cfg.weight_decay},
                                  {"epochs", cfg.epochs}});
  }
  const auto train = dataset.indices_of(fold.train);
  const auto val = dataset.indices_of(fold.val);
  const TextClassifier& model = teacher.model();

  nn::ParameterList params;
  model.collect(params);
  nn::TrainLoopConfig loop;
  loop.epochs = cfg.epochs;
  loop.batch_size = cfg.batch_size;
  loop.lr = cfg.lr;
  loop.weight_decay = cfg.weight_decay;
  loop.early_stop_patience = cfg.early_stop_patience;
  loop.seed = cfg.seed;

  const auto batch_loss = [&](std::span<const std::size_t> batch, const nn::ForwardMode& mode) {
    nn::Var total;
    for (auto b : batch) {
      const auto& post = dataset.posts[train[b]];
      const nn::Var lp = nn::log_softmax_rows(model.logits(post, mode));
      const nn::Var nll = nn::scale(nn::pick(lp, 0, static_cast<Eigen::Index>(post.label)), -1.0);
      total = total.defined() ? nn::add(total, nll) : nll;
    }
    return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
  };
  const auto validate = [&]() {
    nn::Validation v;
    if (val.empty()) return v;
    std::vector<std::size_t> truth, pred;
    double loss = 0.0;
    for (auto i : val) {
      const auto p = model.predict_proba(dataset.posts[i]);
      truth.push_back(dataset.posts[i].label);
      pred.push_back(eval::argmax(p));
      loss -= std::log(std::max(p[dataset.posts[i].label], 1e-12));
    }
    v.score = eval::confusion_metrics(truth, pred, dataset.classes).weighted_f1;
    v.loss = loss / static_cast<double>(val.size());
    return v;
  };

  TrainedTextTeacher out;
  out.log = nn::run_training(params, loop, train.size(), batch_loss, validate);
  out.teacher = std::make_shared<const TextTeacher>(std::move(teacher));
  out.validation = evaluate_teacher(*out.teacher, dataset, fold.val);
  return out;
}

}  // namespace mmkd::text
