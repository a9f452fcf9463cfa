#include "mmkd/experiment/config.hpp"

#include "mmkd/audio/tts.hpp"
#include "mmkd/emotion/lexicon.hpp"
#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace mmkd::experiment {

namespace {

const std::set<std::string> kTopLevel = {
    "dataset",       "text_backend",   "text_width",      "tts_backend",   "lexicon",
    "text_teacher",  "emotion",        "audio_teacher",   "student",       "seed",
    "output_dir",    "teacher_store",  "max_folds",       "allow_out_of_space", "resume"};

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kInvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopLevel.contains(key)) throw Error(ErrorKind::kInvalidConfig, "unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset.path = d.value("path", c.dataset.path);
      c.dataset.name = d.value("name", c.dataset.name);
      c.dataset.protocol = d.value("protocol", c.dataset.protocol);
      if (d.contains("toy")) {
        c.dataset.toy = true;
        c.dataset.toy_posts = d.at("toy").value("posts", c.dataset.toy_posts);
        c.dataset.toy_seed = d.at("toy").value("seed", c.dataset.toy_seed);
      }
    }
    c.text_backend = j.value("text_backend", c.text_backend);
    c.text_width = j.value("text_width", c.text_width);
    c.tts_backend = j.value("tts_backend", c.tts_backend);
    c.lexicon = j.value("lexicon", c.lexicon);
    if (j.contains("text_teacher")) {
      const auto& t = j.at("text_teacher");
      if (t.contains("head")) c.text_head = t.at("head").get<text::HeadConfig>();
      if (t.contains("finetune")) c.text_finetune = t.at("finetune").get<text::FinetuneConfig>();
    }
    if (j.contains("emotion")) {
      const auto& e = j.at("emotion");
      if (e.contains("pipeline")) c.emotion_pipeline = e.at("pipeline").get<emotion::EmotionPipelineConfig>();
      if (e.contains("teacher")) c.emotion_teacher = e.at("teacher").get<emotion::EmotionTeacherConfig>();
    }
    if (j.contains("audio_teacher")) c.audio_teacher = j.at("audio_teacher").get<audio::AudioTeacherConfig>();
    if (j.contains("student")) c.student = j.at("student").get<distill::DistillConfig>();
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.value("output_dir", c.output_dir);
    c.teacher_store = j.value("teacher_store", c.teacher_store);
    c.max_folds = j.value("max_folds", c.max_folds);
    c.allow_out_of_space = j.value("allow_out_of_space", c.allow_out_of_space);
    c.resume = j.value("resume", c.resume);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig, e.what());
  }
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json dataset = {{"path", c.dataset.path}, {"name", c.dataset.name}, {"protocol", c.dataset.protocol}};
  if (c.dataset.toy) dataset["toy"] = {{"posts", c.dataset.toy_posts}, {"seed", c.dataset.toy_seed}};
  return {{"dataset", dataset},
          {"text_backend", c.text_backend},
          {"text_width", c.text_width},
          {"tts_backend", c.tts_backend},
          {"lexicon", c.lexicon},
          {"text_teacher", {{"head", c.text_head}, {"finetune", c.text_finetune}}},
          {"emotion", {{"pipeline", c.emotion_pipeline}, {"teacher", c.emotion_teacher}}},
          {"audio_teacher", c.audio_teacher},
          {"student", c.student},
          {"seed", c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr)},
          {"output_dir", c.output_dir},
          {"teacher_store", c.teacher_store},
          {"max_folds", c.max_folds},
          {"allow_out_of_space", c.allow_out_of_space},
          {"resume", c.resume}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::filesystem::path artifact_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kArtifactRootEnv); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / p;
  }
  return std::filesystem::absolute(p);
}

ExperimentConfig resolve(ExperimentConfig c) {
  if (!c.seed) throw Error(ErrorKind::kInvalidConfig, "config must set a seed");
  const std::uint64_t s = *c.seed;
  c.text_finetune.seed = s;
  c.emotion_pipeline.gcn.seed = s + 1;
  c.emotion_pipeline.refine.seed = s + 2;
  c.emotion_teacher.seed = s + 3;
  c.audio_teacher.seed = s + 4;
  c.student.seed = s + 5;
  if (c.allow_out_of_space) {
    c.text_finetune.allow_out_of_space = true;
    c.emotion_teacher.allow_out_of_space = true;
    c.audio_teacher.allow_out_of_space = true;
    c.student.allow_out_of_space = true;
  }
  c.output_dir = artifact_path(c.output_dir).lexically_normal().string();
  c.teacher_store = c.teacher_store.empty()
                        ? (std::filesystem::path(c.output_dir) / "teacher_store").string()
                        : artifact_path(c.teacher_store).lexically_normal().string();
  if (!c.dataset.toy && !c.dataset.path.empty() && c.dataset.name.empty()) {
    c.dataset.name = std::filesystem::path(c.dataset.path).stem().string();
  }
  return c;
}

text::EncoderSpec text_backend_spec(const ExperimentConfig& cfg) {
  auto spec = text::resolve_backend(cfg.text_backend);
  if (cfg.text_width > 0) spec.width = cfg.text_width;
  return spec;
}

void validate_config(const ExperimentConfig& cfg) {
  if (!cfg.seed) throw Error(ErrorKind::kInvalidConfig, "config must set a seed");
  if (!cfg.dataset.toy && cfg.dataset.path.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "dataset.path or dataset.toy is required");
  }
  if (!cfg.dataset.protocol.empty()) corpus::parse_protocol(cfg.dataset.protocol);
  const auto spec = text_backend_spec(cfg);
  text::validate_head(cfg.text_head, spec.width);
  text::validate_head(cfg.student.head, spec.width);
  distill::validate(cfg.student);
  audio::make_tts_backend(cfg.tts_backend);
  audio::patch_grid(cfg.audio_teacher.max_frames, cfg.audio_teacher.patch_size, cfg.audio_teacher.overlap);
  if (cfg.audio_teacher.width % cfg.audio_teacher.heads != 0) {
    throw Error(ErrorKind::kIncompatibleHead, "audio heads do not divide the audio width");
  }
  if (cfg.lexicon != "toy") {
    if (!std::filesystem::exists(cfg.lexicon)) {
      throw Error(ErrorKind::kIoError, "lexicon not found: " + cfg.lexicon);
    }
    emotion::EmotionLexicon::load(cfg.lexicon);
  }
  if (!cfg.text_finetune.allow_out_of_space) {
    require_in_space(text_teacher_space(), {{"dropout", cfg.text_head.dropout},
                                            {"layers", cfg.text_head.layers},
                                            {"heads", cfg.text_head.heads},
                                            {"lr", cfg.text_finetune.lr},
                                            {"weight_decay", cfg.text_finetune.weight_decay},
                                            {"epochs", cfg.text_finetune.epochs}});
  }
  const auto& e = cfg.emotion_teacher;
  if (!e.allow_out_of_space) {
    require_in_space(emotion_teacher_space(), {{"dropout", e.dropout},
                                               {"hidden_layers", e.hidden_layers},
                                               {"hidden_dim", e.hidden_dim},
                                               {"lr", e.lr},
                                               {"weight_decay", e.weight_decay}});
  }
  const auto& a = cfg.audio_teacher;
  if (!a.allow_out_of_space) {
    require_in_space(audio_teacher_space(), {{"dropout", a.dropout},
                                             {"layers", a.layers},
                                             {"heads", a.heads},
                                             {"lr", a.lr},
                                             {"patience", a.plateau_patience},
                                             {"factor", a.plateau_factor}});
  }
}

ExperimentConfig toy_experiment(std::size_t posts, std::uint64_t seed, std::string output_dir) {
  ExperimentConfig c;
  c.dataset.toy = true;
  c.dataset.toy_posts = posts;
  c.dataset.toy_seed = seed;
  c.seed = seed;
  c.output_dir = std::move(output_dir);
  c.max_folds = 1;
  c.allow_out_of_space = true;

  c.text_finetune.lr = 3e-3;
  c.text_finetune.epochs = 8;
  c.text_finetune.batch_size = 8;

  c.emotion_pipeline.gcn.epochs = 40;
  c.emotion_pipeline.refine.epochs = 4;
  c.emotion_pipeline.refine.lr = 1e-2;
  c.emotion_teacher.epochs = 40;

  c.audio_teacher.lr = 1e-3;
  c.audio_teacher.epochs = 8;
  c.audio_teacher.batch_size = 4;
  c.audio_teacher.max_frames = 64;

  c.student.lr = 3e-3;
  c.student.epochs = 10;
  c.student.batch_size = 8;
  return c;
}

void apply_student_assignment(ExperimentConfig& cfg, const nlohmann::json& a) {
  auto& s = cfg.student;
  if (a.contains("dropout")) s.head.dropout = a.at("dropout").get<double>();
  if (a.contains("lr")) s.lr = a.at("lr").get<double>();
  if (a.contains("weight_decay")) s.weight_decay = a.at("weight_decay").get<double>();
  if (a.contains("layers")) s.head.layers = a.at("layers").get<int>();
  if (a.contains("heads")) s.head.heads = a.at("heads").get<int>();
  if (a.contains("activation")) s.head.activation = text::parse_activation(a.at("activation").get<std::string>());
  if (a.contains("epochs")) s.epochs = a.at("epochs").get<int>();
}

}  // namespace mmkd::experiment
