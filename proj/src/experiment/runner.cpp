#include "mmkd/experiment/runner.hpp"

#include "mmkd/audio/tts.hpp"
#include "mmkd/corpus/fixtures.hpp"
#include "mmkd/emotion/lexicon.hpp"
#include "mmkd/error.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/nn/optim.hpp"

#include <climits>
#include <cstdint>
#include <fstream>

namespace mmkd::experiment {

namespace fs = std::filesystem;

namespace {

std::string digest(const nlohmann::json& j) {
  const std::string s = j.dump();
  return nn::fnv1a_hex(s.data(), s.size());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json fold_json(const corpus::Fold& f) { return nlohmann::json{{"train", f.train}, {"val", f.val}}; }

int modality_slot(Modality m) { return static_cast<int>(m); }

}  // namespace

std::string dataset_fingerprint(const corpus::Dataset& ds) {
  nlohmann::json j = {{"classes", ds.classes}};
  auto& posts = j["posts"] = nlohmann::json::array();
  for (const auto& p : ds.posts) posts.push_back({p.id, p.text, p.label});
  return digest(j);
}

ExperimentRunner::ExperimentRunner(ExperimentConfig cfg) {
  in_stage("config", [&] {
    cfg_ = resolve(std::move(cfg));
    validate_config(cfg_);
  });
  in_stage("config", [&] { write_json(dir() / "resolved_config.json", config_to_json(cfg_)); });
}

const corpus::Dataset& ExperimentRunner::dataset() {
  if (!dataset_) {
    in_stage("ingest", [&] {
      const auto& d = cfg_.dataset;
      if (d.toy) {
        dataset_ = d.protocol.empty()
                       ? corpus::toy_dataset(d.toy_posts, d.toy_seed)
                       : corpus::toy_dataset(d.toy_posts, d.toy_seed, corpus::parse_protocol(d.protocol));
      } else {
        corpus::LoadOptions opts;
        if (!d.protocol.empty()) opts.protocol = corpus::parse_protocol(d.protocol);
        dataset_ = corpus::load_dataset(artifact_path(d.path), d.name, opts);
      }
      write_json(dir() / "dataset_stats.json", corpus::compute_stats(*dataset_));
    });
  }
  return *dataset_;
}

const corpus::SplitPlan& ExperimentRunner::plan() {
  if (!plan_) {
    const auto& ds = dataset();
    in_stage("ingest", [&] {
      plan_ = corpus::make_splits(ds, *cfg_.seed);
      write_json(dir() / "splits.json", *plan_);
    });
  }
  return *plan_;
}

std::size_t ExperimentRunner::fold_count() {
  const std::size_t n = plan().folds.size();
  return cfg_.max_folds > 0 ? std::min(n, cfg_.max_folds) : n;
}

const corpus::Fold& ExperimentRunner::fold_at(std::size_t fold) {
  if (fold >= fold_count()) {
    throw Error(ErrorKind::kInvalidConfig, "fold " + std::to_string(fold) + " out of range");
  }
  return plan().folds[fold];
}

fs::path ExperimentRunner::fold_dir(std::size_t fold) const {
  return dir() / ("fold_" + std::to_string(fold));
}

const emotion::EmotionLexicon& ExperimentRunner::lexicon() {
  if (!lexicon_) {
    in_stage("lexicon", [&] {
      lexicon_ = cfg_.lexicon == "toy" ? emotion::toy_lexicon()
                                       : emotion::EmotionLexicon::load(cfg_.lexicon);
    });
  }
  return *lexicon_;
}

const audio::AudioTable& ExperimentRunner::audio_table() {
  if (!audio_) {
    const auto& ds = dataset();
    in_stage("audio-synthesis", [&] {
      const std::string key = digest({{"dataset", dataset_fingerprint(ds)},
                                      {"tts", cfg_.tts_backend},
                                      {"seed", *cfg_.seed}});
      const fs::path where = fs::path(cfg_.teacher_store) / ("audio-" + key);
      if (cfg_.resume && fs::exists(where / "index.json")) {
        audio_ = audio::load_audio_table(where);
      } else {
        const auto backend = audio::make_tts_backend(cfg_.tts_backend, *cfg_.seed);
        audio_ = audio::build_audio_table(ds, *backend);
        audio::save_audio_table(*audio_, where);
        write_json(dir() / "audio_durations.json",
                   audio::duration_report_json(audio::audio_duration_report(ds, *audio_)));
      }
    });
  }
  return *audio_;
}

const emotion::EmotionFeatures& ExperimentRunner::emotion_features() {
  if (!emotion_) {
    const auto& ds = dataset();
    const auto& lex = lexicon();
    in_stage("emotion-features", [&] {
      emotion_ = emotion::prepare_emotion_features(ds, lex, text_backend_spec(cfg_),
                                                   cfg_.emotion_pipeline);
    });
  }
  return *emotion_;
}

std::string ExperimentRunner::teacher_key(Modality m, const corpus::Fold& fold) {
  nlohmann::json j = {{"modality", modality_name(m)},
                      {"dataset", dataset_fingerprint(dataset())},
                      {"fold", fold_json(fold)}};
  switch (m) {
    case Modality::kText:
      j["backend"] = text_backend_spec(cfg_);
      j["head"] = cfg_.text_head;
      j["finetune"] = cfg_.text_finetune;
      break;
    case Modality::kEmotion: {
      nlohmann::json lex = nlohmann::json::object();
      for (const auto& [term, set] : lexicon().entries()) lex[term] = set.to_string();
      j["lexicon"] = lex;
      j["backend"] = text_backend_spec(cfg_);
      j["pipeline"] = cfg_.emotion_pipeline;
      j["teacher"] = cfg_.emotion_teacher;
      break;
    }
    case Modality::kAudio:
      j["tts"] = cfg_.tts_backend;
      j["tts_seed"] = *cfg_.seed;
      j["teacher"] = cfg_.audio_teacher;
      break;
  }
  return std::string(modality_name(m)) + "-" + digest(j);
}

std::shared_ptr<const Teacher> ExperimentRunner::obtain_teacher(Modality m, const corpus::Fold& fold,
                                                                TeacherRecord& record) {
  const std::string stage = "teacher:" + std::string(modality_name(m));
  const std::string key = in_stage(stage, [&] { return teacher_key(m, fold); });
  record.modality = m;
  record.key = key;
  record.dir = fs::path(cfg_.teacher_store) / key;
  if (const auto it = teachers_.find(key); it != teachers_.end()) {
    record.reused = loaded_.at(key);
    record.checksum = it->second->checksum();
    return it->second;
  }
  const auto& ds = dataset();
  std::shared_ptr<const Teacher> out;
  const bool stored = cfg_.resume && fs::exists(record.dir / "manifest.json");
  // Upstream features are built outside the teacher stage so their own
  // stage name is reported on failure.
  if (!stored && m == Modality::kAudio) audio_table();
  if (!stored && m == Modality::kEmotion) emotion_features();
  in_stage(stage, [&] {
    if (stored) {
      switch (m) {
        case Modality::kText:
          out = std::make_shared<const text::TextTeacher>(text::TextTeacher::load(record.dir));
          break;
        case Modality::kEmotion:
          out = std::make_shared<const emotion::EmotionTeacher>(emotion::EmotionTeacher::load(record.dir));
          break;
        case Modality::kAudio:
          out = std::make_shared<const audio::AudioTeacher>(audio::AudioTeacher::load(record.dir));
          break;
      }
      record.reused = true;
    } else {
      nlohmann::json report;
      switch (m) {
        case Modality::kText: {
          auto trained = text::finetune_teacher(
              text::build_text_teacher(text_backend_spec(cfg_), cfg_.text_head, ds, cfg_.text_finetune.seed),
              ds, fold, cfg_.text_finetune);
          trained.teacher->save(record.dir);
          report = trained.validation;
          out = trained.teacher;
          break;
        }
        case Modality::kEmotion: {
          auto trained = emotion::train_emotion_teacher(emotion_->post_embeddings, ds, fold,
                                                        cfg_.emotion_teacher);
          trained.teacher->save(record.dir);
          report = trained.validation;
          out = trained.teacher;
          break;
        }
        case Modality::kAudio: {
          auto trained = audio::train_audio_teacher(ds, *audio_, fold, cfg_.audio_teacher);
          trained.teacher->save(record.dir);
          report = trained.validation;
          out = trained.teacher;
          break;
        }
      }
      write_json(record.dir / "validation.json", report);
      record.reused = false;
    }
  });
  record.checksum = out->checksum();
  loaded_[key] = record.reused;
  teachers_.emplace(key, out);
  return out;
}

std::shared_ptr<const Teacher> ExperimentRunner::teacher(Modality m, std::size_t fold) {
  auto& record = records_[{modality_slot(m), fold}];
  return obtain_teacher(m, fold_at(fold), record);
}

const TeacherRecord& ExperimentRunner::teacher_record(Modality m, std::size_t fold) {
  teacher(m, fold);
  return records_.at({modality_slot(m), fold});
}

std::shared_ptr<const text::TextTeacher> ExperimentRunner::text_teacher(std::size_t fold) {
  return std::static_pointer_cast<const text::TextTeacher>(teacher(Modality::kText, fold));
}

std::shared_ptr<const emotion::EmotionTeacher> ExperimentRunner::emotion_teacher(std::size_t fold) {
  return std::static_pointer_cast<const emotion::EmotionTeacher>(teacher(Modality::kEmotion, fold));
}

std::shared_ptr<const audio::AudioTeacher> ExperimentRunner::audio_teacher(std::size_t fold) {
  return std::static_pointer_cast<const audio::AudioTeacher>(teacher(Modality::kAudio, fold));
}

const distill::TeacherCache& ExperimentRunner::teacher_outputs(std::size_t fold) {
  if (const auto it = caches_.find(fold); it != caches_.end()) return it->second;
  std::vector<std::shared_ptr<const Teacher>> owned;
  for (Modality m : cfg_.student.teacher_set) owned.push_back(teacher(m, fold));
  const auto& ds = dataset();
  return in_stage("teacher-outputs", [&]() -> const distill::TeacherCache& {
    std::vector<const Teacher*> raw;
    for (const auto& t : owned) raw.push_back(t.get());
    auto cache = distill::build_teacher_cache(raw, ds);
    distill::save_teacher_cache(cache, fold_dir(fold) / "teacher_outputs.json");
    return caches_.emplace(fold, std::move(cache)).first->second;
  });
}

distill::StudentInputs ExperimentRunner::student_inputs(const corpus::Fold& fold, std::size_t fold_index) {
  distill::StudentInputs inputs;
  if (distill::uses_emotion(cfg_.student.fusion)) inputs.emotion = emotion_features().post_embeddings;
  if (distill::uses_audio(cfg_.student.fusion)) {
    TeacherRecord scratch;
    auto& record = fold_index == SIZE_MAX ? scratch : records_[{modality_slot(Modality::kAudio), fold_index}];
    const auto t = std::static_pointer_cast<const audio::AudioTeacher>(
        obtain_teacher(Modality::kAudio, fold, record));
    inputs.audio = in_stage("student", [&] { return distill::audio_summaries(*t, dataset()); });
  }
  return inputs;
}

std::shared_ptr<const distill::Student> ExperimentRunner::train_student_for(
    const corpus::Fold& fold, const distill::TeacherCache& cache, const fs::path& out,
    std::size_t fold_index, bool& reused) {
  nlohmann::json teacher_sums = nlohmann::json::object();
  for (Modality m : cfg_.student.teacher_set) {
    TeacherRecord scratch;
    auto& record = fold_index == SIZE_MAX ? scratch : records_[{modality_slot(m), fold_index}];
    obtain_teacher(m, fold, record);
    teacher_sums[std::string(modality_name(m))] = record.checksum;
  }
  auto inputs = student_inputs(fold, fold_index);
  const auto& ds = dataset();
  return in_stage("student", [&]() -> std::shared_ptr<const distill::Student> {
    const std::string hash = digest({{"student", cfg_.student},
                                     {"backend", text_backend_spec(cfg_)},
                                     {"teachers", teacher_sums},
                                     {"fold", fold_json(fold)},
                                     {"dataset", dataset_fingerprint(ds)}});
    if (!out.empty() && cfg_.resume && fs::exists(out / "manifest.json")) {
      const auto manifest = nn::read_checkpoint(out).manifest;
      if (manifest.value("config_hash", "") == hash) {
        reused = true;
        return std::make_shared<const distill::Student>(distill::Student::load(out));
      }
    }
    reused = false;
    auto trained = distill::train_student(
        distill::build_student(text_backend_spec(cfg_), cfg_.student, ds, std::move(inputs)), ds, fold,
        cache, cfg_.student);
    if (!out.empty()) {
      auto extra = distill::student_manifest_extra(cfg_.student);
      extra["config_hash"] = hash;
      extra["teacher_checksums"] = teacher_sums;
      trained.student->save(out, extra);
      write_json(out.parent_path() / "student_log.json", distill::student_log_json(trained));
    }
    return trained.student;
  });
}

std::shared_ptr<const distill::Student> ExperimentRunner::student(std::size_t fold) {
  if (const auto it = students_.find(fold); it != students_.end()) return it->second;
  const auto& cache = teacher_outputs(fold);
  bool reused = false;
  auto s = train_student_for(fold_at(fold), cache, fold_dir(fold) / "student", fold, reused);
  student_reused_[fold] = reused;
  return students_.emplace(fold, std::move(s)).first->second;
}

FoldOutcome ExperimentRunner::run_fold(std::size_t fold) {
  const auto s = student(fold);
  const auto& f = fold_at(fold);
  const auto& ds = dataset();
  return in_stage("evaluate", [&] {
    FoldOutcome o;
    o.test_ids = f.test;
    for (const auto& id : f.test) o.predictions.push_back(eval::argmax(s->predict_proba(ds.post(id))));
    o.train = distill::evaluate_student(*s, ds, f.train);
    for (Modality m : cfg_.student.teacher_set) o.teachers.push_back(records_.at({modality_slot(m), fold}));
    o.student_checksum = s->checksum();
    o.student_reused = student_reused_[fold];
    return o;
  });
}

ExperimentResult ExperimentRunner::run() {
  ExperimentResult result;
  result.dir = dir();
  const auto& ds = dataset();
  corpus::SplitPlan used = plan();
  const std::size_t n = fold_count();
  const bool truncated = n < used.folds.size();
  used.folds.resize(n);
  const eval::FoldPipeline pipeline = [&](const corpus::Dataset&, const corpus::Fold&, std::size_t k) {
    result.folds.push_back(run_fold(k));
    return result.folds.back().predictions;
  };
  result.evaluation = eval::cross_validate(pipeline, ds, used, !truncated);
  in_stage("evaluate", [&] {
    nlohmann::json metrics = result.evaluation;
    auto& train = metrics["student_train"] = nlohmann::json::array();
    for (const auto& f : result.folds) train.push_back(f.train);
    write_json(dir() / "metrics.json", metrics);
    nlohmann::json teachers = nlohmann::json::array();
    for (std::size_t k = 0; k < result.folds.size(); ++k) {
      nlohmann::json fold = {{"fold", k}, {"student_checksum", result.folds[k].student_checksum}};
      for (const auto& t : result.folds[k].teachers) {
        fold[std::string(modality_name(t.modality))] = {{"key", t.key}, {"checksum", t.checksum}};
      }
      teachers.push_back(fold);
    }
    write_json(dir() / "teachers.json", teachers);
  });
  return result;
}

eval::MetricsReport ExperimentRunner::validate_fold(const corpus::Fold& fold) {
  std::vector<std::shared_ptr<const Teacher>> owned;
  for (Modality m : cfg_.student.teacher_set) {
    TeacherRecord scratch;
    owned.push_back(obtain_teacher(m, fold, scratch));
  }
  const auto& ds = dataset();
  const auto cache = in_stage("teacher-outputs", [&] {
    std::vector<const Teacher*> raw;
    for (const auto& t : owned) raw.push_back(t.get());
    return distill::build_teacher_cache(raw, ds);
  });
  bool reused = false;
  const auto s = train_student_for(fold, cache, {}, SIZE_MAX, reused);
  return in_stage("evaluate", [&] { return distill::evaluate_student(*s, ds, fold.val); });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) { return ExperimentRunner(cfg).run(); }

}  // namespace mmkd::experiment
