#include "mmkd/distill/student.hpp"

#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mmkd::distill {

std::string_view fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kTextOnly: return "text-only";
    case FusionMode::kEmotion: return "+emotion";
    case FusionMode::kAudio: return "+audio";
    case FusionMode::kBoth: return "+both";
  }
  return "unknown";
}

FusionMode parse_fusion_mode(std::string_view name) {
  for (FusionMode m : all_fusion_modes()) {
    if (fusion_mode_name(m) == name) return m;
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown fusion mode '" + std::string(name) + "'");
}

std::vector<FusionMode> all_fusion_modes() {
  return {FusionMode::kTextOnly, FusionMode::kEmotion, FusionMode::kAudio, FusionMode::kBoth};
}

bool uses_emotion(FusionMode mode) {
  return mode == FusionMode::kEmotion || mode == FusionMode::kBoth;
}

bool uses_audio(FusionMode mode) { return mode == FusionMode::kAudio || mode == FusionMode::kBoth; }

nn::Linear make_fusion_projector(Eigen::Index text_width, Eigen::Index emotion_width,
                                 Eigen::Index audio_width, FusionMode mode, std::mt19937_64& rng) {
  Eigen::Index in = text_width;
  if (uses_emotion(mode)) in += emotion_width;
  if (uses_audio(mode)) in += audio_width;
  return nn::Linear(in, text_width, rng);
}

nn::Var fuse_student_inputs(const nn::Var& text_states, const std::optional<nn::RowVector>& emotion,
                            const std::optional<nn::RowVector>& audio, FusionMode mode,
                            const nn::Linear* projector) {
  if (mode == FusionMode::kTextOnly) return text_states;
  if (uses_emotion(mode) && !emotion) {
    throw Error(ErrorKind::kMissingModality, "fusion mode needs an emotion vector");
  }
  if (uses_audio(mode) && !audio) {
    throw Error(ErrorKind::kMissingModality, "fusion mode needs an audio vector");
  }
  if (projector == nullptr) throw Error(ErrorKind::kMissingModality, "fusion projector missing");
  std::vector<nn::Var> parts = {nn::slice_rows(text_states, 0, 1)};
  if (uses_emotion(mode)) parts.push_back(nn::Var::constant(*emotion));
  if (uses_audio(mode)) parts.push_back(nn::Var::constant(*audio));
  const nn::Var joined = nn::concat_cols(parts);
  if (joined.cols() != projector->in_features()) {
    throw Error(ErrorKind::kInvalidConfig, "fused width " + std::to_string(joined.cols()) +
                                               " does not match projector input " +
                                               std::to_string(projector->in_features()));
  }
  const nn::Var summary = projector->forward(joined);
  if (text_states.rows() == 1) return summary;
  const nn::Var rows[] = {summary, nn::slice_rows(text_states, 1, text_states.rows() - 1)};
  return nn::concat_rows(rows);
}

void to_json(nlohmann::json& j, const DistillConfig& c) {
  std::vector<std::string> teachers;
  for (Modality m : c.teacher_set) teachers.emplace_back(modality_name(m));
  j = {{"lambda_task", c.lambda_task},
       {"lambda_kd", c.lambda_kd},
       {"temperature", c.temperature},
       {"teacher_set", teachers},
       {"epochs", c.epochs},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"early_stop_patience", c.early_stop_patience},
       {"head", c.head},
       {"fusion", fusion_mode_name(c.fusion)},
       {"vanilla", c.vanilla},
       {"use_kd", c.use_kd},
       {"seed", c.seed},
       {"allow_out_of_space", c.allow_out_of_space}};
}

void from_json(const nlohmann::json& j, DistillConfig& c) {
  c.lambda_task = j.value("lambda_task", c.lambda_task);
  c.lambda_kd = j.value("lambda_kd", c.lambda_kd);
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("teacher_set")) {
    c.teacher_set.clear();
    for (const auto& name : j.at("teacher_set")) c.teacher_set.push_back(parse_modality(name.get<std::string>()));
  }
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  if (j.contains("head")) c.head = j.at("head").get<text::HeadConfig>();
  if (j.contains("fusion")) c.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
  c.vanilla = j.value("vanilla", c.vanilla);
  c.use_kd = j.value("use_kd", c.use_kd);
  c.seed = j.value("seed", c.seed);
  c.allow_out_of_space = j.value("allow_out_of_space", c.allow_out_of_space);
}

void validate(const DistillConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw Error(ErrorKind::kInvalidConfig, "temperature must be positive");
  }
  if (cfg.lambda_task < 0.0 || cfg.lambda_kd < 0.0) {
    throw Error(ErrorKind::kInvalidConfig, "loss weights must be non-negative");
  }
  if (cfg.teacher_set.empty()) throw Error(ErrorKind::kInvalidConfig, "teacher_set is empty");
  if (std::set<Modality>(cfg.teacher_set.begin(), cfg.teacher_set.end()).size() !=
      cfg.teacher_set.size()) {
    throw Error(ErrorKind::kInvalidConfig, "teacher_set lists a modality twice");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw Error(ErrorKind::kInvalidConfig, "epochs and batch_size must be positive");
  }
  if (!cfg.allow_out_of_space) {
    experiment::require_in_space(experiment::student_space(),
                                 {{"dropout", cfg.head.dropout},
                                  {"lr", cfg.lr},
                                  {"weight_decay", cfg.weight_decay},
                                  {"layers", cfg.head.layers},
                                  {"heads", cfg.head.heads},
                                  {"activation", text::activation_name(cfg.head.activation)},
                                  {"epochs", cfg.epochs}});
  }
}

emotion::EmbeddingTable audio_summaries(const audio::AudioTeacher& teacher,
                                        const corpus::Dataset& dataset) {
  std::vector<std::string> keys;
  nn::Matrix values;
  for (const auto& post : dataset.posts) {
    const nn::Var s = teacher.summary(teacher.features(post.id), {});
    if (values.size() == 0) values.resize(static_cast<Eigen::Index>(dataset.posts.size()), s.cols());
    values.row(static_cast<Eigen::Index>(keys.size())) = s.value();
    keys.push_back(post.id);
  }
  return emotion::EmbeddingTable(std::move(keys), std::move(values));
}

Student::Student(text::TextClassifier model, FusionMode mode, StudentInputs inputs,
                 std::vector<std::string> classes, std::uint64_t seed)
    : model_(std::move(model)),
      fusion_(mode),
      inputs_(std::move(inputs)),
      classes_(std::move(classes)),
      seed_(seed) {
  if (uses_emotion(mode) && !inputs_.emotion) {
    throw Error(ErrorKind::kMissingModality, "fusion mode needs emotion embeddings");
  }
  if (uses_audio(mode) && !inputs_.audio) {
    throw Error(ErrorKind::kMissingModality, "fusion mode needs audio embeddings");
  }
  if (mode != FusionMode::kTextOnly) {
    std::mt19937_64 rng(seed ^ 0xf5e0);
    projector_ = make_fusion_projector(model_.encoder().spec().width,
                                       inputs_.emotion ? inputs_.emotion->width() : 0,
                                       inputs_.audio ? inputs_.audio->width() : 0, mode, rng);
  }
}

std::optional<nn::RowVector> Student::extra_row(
    const std::optional<emotion::EmbeddingTable>& table, const std::string& id,
    const char* what) const {
  if (!table) return std::nullopt;
  if (!table->contains(id)) {
    throw Error(ErrorKind::kMissingModality, std::string("no ") + what + " vector for post " + id);
  }
  return table->row(id);
}

nn::Var Student::logits(const corpus::Post& post, const nn::ForwardMode& mode) const {
  const nn::Var seq = model_.sequence(post);
  const auto emo = uses_emotion(fusion_) ? extra_row(inputs_.emotion, post.id, "emotion")
                                         : std::nullopt;
  const auto aud = uses_audio(fusion_) ? extra_row(inputs_.audio, post.id, "audio") : std::nullopt;
  const nn::Var fused =
      fuse_student_inputs(seq, emo, aud, fusion_, projector_ ? &*projector_ : nullptr);
  return model_.logits_from_sequence(fused, mode);
}

std::vector<double> Student::predict_proba(const corpus::Post& post) const {
  return text::softmax(logits(post, {}).value());
}

void Student::collect(nn::ParameterList& out) const {
  model_.collect(out);
  if (projector_) projector_->collect(out);
}

std::string Student::checksum() const {
  nn::ParameterList params;
  collect(params);
  return nn::checksum(params);
}

void Student::save(const std::filesystem::path& dir, const nlohmann::json& extra) const {
  nn::ParameterList params;
  collect(params);
  nlohmann::json manifest = extra.is_object() ? extra : nlohmann::json::object();
  manifest["kind"] = "student";
  manifest["backend"] = model_.encoder().spec();
  manifest["head"] = model_.head_config();
  manifest["classes"] = classes_;
  manifest["seed"] = seed_;
  manifest["vocabulary"] = model_.encoder().vocabulary();
  manifest["fusion"] = fusion_mode_name(fusion_);
  for (const auto& [name, table] : {std::pair{"emotion_inputs", &inputs_.emotion},
                                    std::pair{"audio_inputs", &inputs_.audio}}) {
    if (!*table) continue;
    manifest[name] = {{"keys", (*table)->keys()}, {"width", (*table)->width()}};
    params.push_back(nn::Var::constant((*table)->values()));
  }
  nn::write_checkpoint(dir, std::move(manifest), params);
}

Student Student::load(const std::filesystem::path& dir) {
  const auto ckpt = nn::read_checkpoint(dir);
  const auto& m = ckpt.manifest;
  if (m.value("kind", "") != "student") {
    throw Error(ErrorKind::kIoError, dir.string() + " is not a student checkpoint");
  }
  StudentInputs inputs;
  std::vector<nn::Var> tables;
  std::vector<std::vector<std::string>> keys;
  for (const char* name : {"emotion_inputs", "audio_inputs"}) {
    if (!m.contains(name)) continue;
    keys.push_back(m.at(name).at("keys").get<std::vector<std::string>>());
    tables.push_back(nn::Var::constant(nn::Matrix::Zero(static_cast<Eigen::Index>(keys.back().size()),
                                                        m.at(name).at("width").get<Eigen::Index>())));
  }
  // Shapes are enough to size the projector; values arrive with restore().
  std::size_t t = 0;
  if (m.contains("emotion_inputs")) {
    inputs.emotion = emotion::EmbeddingTable(keys[t], tables[t].value());
    ++t;
  }
  if (m.contains("audio_inputs")) inputs.audio = emotion::EmbeddingTable(keys[t], tables[t].value());

  auto classes = m.at("classes").get<std::vector<std::string>>();
  text::TextEncoder encoder(m.at("backend").get<text::EncoderSpec>(),
                            m.at("vocabulary").get<std::vector<std::string>>());
  const auto seed = m.at("seed").get<std::uint64_t>();
  text::TextClassifier model(std::move(encoder), m.at("head").get<text::HeadConfig>(),
                             classes.size(), seed);
  Student s(std::move(model), parse_fusion_mode(m.at("fusion").get<std::string>()),
            std::move(inputs), std::move(classes), seed);
  nn::ParameterList params;
  s.collect(params);
  params.insert(params.end(), tables.begin(), tables.end());
  nn::restore(params, ckpt.params);
  t = 0;
  if (s.inputs_.emotion) {
    s.inputs_.emotion = emotion::EmbeddingTable(keys[t], tables[t].value());
    ++t;
  }
  if (s.inputs_.audio) s.inputs_.audio = emotion::EmbeddingTable(keys[t], tables[t].value());
  return s;
}

Student build_student(const text::EncoderSpec& backend, const DistillConfig& cfg,
                      const corpus::Dataset& dataset, StudentInputs inputs) {
  text::EncoderSpec spec = backend;
  if (cfg.vanilla) {
    spec.name = "vanilla-transformer";
    spec.seed = cfg.seed ^ 0x7a11a;
  }
  text::validate_head(cfg.head, spec.width);
  std::vector<std::string> texts;
  for (const auto& p : dataset.posts) texts.push_back(p.text);
  text::TextEncoder encoder(spec, text::build_vocabulary(texts));
  text::TextClassifier model(std::move(encoder), cfg.head, dataset.classes.size(), cfg.seed);
  return Student(std::move(model), cfg.fusion, std::move(inputs), dataset.classes, cfg.seed);
}

eval::MetricsReport evaluate_student(const Student& student, const corpus::Dataset& dataset,
                                     const std::vector<std::string>& ids) {
  std::vector<std::size_t> truth, pred;
  for (const auto& id : ids) {
    const auto& post = dataset.post(id);
    truth.push_back(post.label);
    pred.push_back(eval::argmax(student.predict_proba(post)));
  }
  return eval::confusion_metrics(truth, pred, dataset.classes);
}

nlohmann::json student_manifest_extra(const DistillConfig& cfg) {
  std::vector<std::string> teachers;
  for (Modality m : cfg.teacher_set) teachers.emplace_back(modality_name(m));
  return {{"teacher_set", teachers},
          {"lambda_task", cfg.lambda_task},
          {"lambda_kd", cfg.lambda_kd},
          {"temperature", cfg.temperature},
          {"use_kd", cfg.use_kd},
          {"vanilla", cfg.vanilla},
          {"distill_seed", cfg.seed}};
}

nlohmann::json student_log_json(const TrainedStudent& trained) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : trained.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"task", e.task},
                      {"kd", e.kd},
                      {"total", e.total},
                      {"val_score", e.val_score},
                      {"val_loss", e.val_loss},
                      {"lr", e.lr}});
  }
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trained.steps) {
    steps.push_back(
        {{"epoch", s.epoch}, {"step", s.step}, {"task", s.task}, {"kd", s.kd}, {"total", s.total}});
  }
  return {{"epochs", epochs}, {"steps", steps}};
}

TrainedStudent train_student(Student student, const corpus::Dataset& dataset,
                             const corpus::Fold& fold, const TeacherCache& cache,
                             const DistillConfig& cfg) {
  validate(cfg);
  const auto train = dataset.indices_of(fold.train);
  const auto val = dataset.indices_of(fold.val);

  std::vector<std::vector<double>> soft(train.size());
  if (cfg.use_kd) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      soft[i] = cache.soft_targets(dataset.posts[train[i]].id, cfg.teacher_set);
      if (soft[i].size() != dataset.classes.size()) {
        throw Error(ErrorKind::kClassMismatch, "cached teacher outputs do not match the classes");
      }
    }
  }

  nn::ParameterList params;
  student.collect(params);
  nn::TrainLoopConfig loop;
  loop.epochs = cfg.epochs;
  loop.batch_size = cfg.batch_size;
  loop.lr = cfg.lr;
  loop.weight_decay = cfg.weight_decay;
  loop.early_stop_patience = cfg.early_stop_patience;
  loop.seed = cfg.seed;

  TrainedStudent out;
  const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const auto batch_loss = [&](std::span<const std::size_t> batch, const nn::ForwardMode& mode) {
    nn::Var task_sum, kd_sum;
    for (auto b : batch) {
      const auto& post = dataset.posts[train[b]];
      const nn::Var logits = student.logits(post, mode);
      const nn::Var t = task_loss(logits, post.label);
      task_sum = task_sum.defined() ? nn::add(task_sum, t) : t;
      if (cfg.use_kd) {
        const nn::Var k = kd_loss(logits, soft[b], cfg.temperature);
        kd_sum = kd_sum.defined() ? nn::add(kd_sum, k) : k;
      }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    const nn::Var task = nn::scale(task_sum, inv);
    nn::Var total = nn::scale(task, cfg.lambda_task);
    double kd_value = 0.0;
    if (cfg.use_kd) {
      const nn::Var kd = nn::scale(kd_sum, inv);
      kd_value = kd.scalar();
      total = nn::add(total, nn::scale(kd, cfg.lambda_kd));
    }
    if (mode.training) {
      const std::size_t step = out.steps.size();
      out.steps.push_back({static_cast<int>(step / std::max<std::size_t>(per_epoch, 1)) + 1, step,
                           task.scalar(), kd_value, total.scalar()});
    }
    return total;
  };
  const auto validate_fn = [&]() {
    nn::Validation v;
    std::vector<std::size_t> truth, pred;
    double loss = 0.0;
    for (auto i : val) {
      const auto p = student.predict_proba(dataset.posts[i]);
      truth.push_back(dataset.posts[i].label);
      pred.push_back(eval::argmax(p));
      loss += task_loss(p, dataset.posts[i].label);
    }
    v.score = eval::confusion_metrics(truth, pred, dataset.classes).weighted_f1;
    v.loss = loss / static_cast<double>(val.size());
    return v;
  };

  const auto log = nn::run_training(params, loop, train.size(), batch_loss,
                                    val.empty() ? nn::Validate{} : nn::Validate(validate_fn));
  for (const auto& e : log) {
    StudentEpochLog row;
    row.epoch = e.epoch;
    row.val_score = e.val_score;
    row.val_loss = e.val_loss;
    row.lr = e.lr;
    std::size_t n = 0;
    for (const auto& s : out.steps) {
      if (s.epoch != e.epoch) continue;
      row.task += s.task;
      row.kd += s.kd;
      row.total += s.total;
      ++n;
    }
    if (n > 0) {
      row.task /= static_cast<double>(n);
      row.kd /= static_cast<double>(n);
      row.total /= static_cast<double>(n);
    }
    out.epochs.push_back(row);
  }
  out.student = std::make_shared<const Student>(std::move(student));
  out.validation = evaluate_student(*out.student, dataset, fold.val);
  return out;
}

}  // namespace mmkd::distill
