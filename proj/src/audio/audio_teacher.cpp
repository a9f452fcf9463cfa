#include "mmkd/audio/audio_teacher.hpp"

#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace mmkd::audio {

namespace {

nn::Matrix sigmoid_row(const nn::Matrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

nn::Matrix one_hot(std::size_t label, std::size_t n) {
  nn::Matrix m = nn::Matrix::Zero(1, static_cast<Eigen::Index>(n));
  m(0, static_cast<Eigen::Index>(label)) = 1.0;
  return m;
}

}  // namespace

AudioTable build_audio_table(const corpus::Dataset& dataset, const TtsBackend& backend,
                             const std::filesystem::path& wav_dir) {
  AudioTable table;
  for (const auto& post : dataset.posts) {
    const Waveform wav = synthesize(chunk_text(post.text), backend);
    if (!wav_dir.empty()) write_wav(wav_dir / (post.id + ".wav"), wav);
    if (!table.emplace(post.id, log_mel_spectrogram(wav)).second) {
      throw Error(ErrorKind::kInvalidConfig, "duplicate audio key " + post.id);
    }
  }
  return table;
}

void save_audio_table(const AudioTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  std::size_t n = 0;
  for (const auto& [id, spec] : table) {
    const std::string file = std::to_string(n++) + ".f32";
    write_spectrogram_cache(dir / file, spec);
    index.push_back({{"id", id}, {"file", file}, {"duration", spec.duration_seconds}});
  }
  std::ofstream out(dir / "index.json");
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
}

AudioTable load_audio_table(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw Error(ErrorKind::kIoError, "missing spectrogram index in " + dir.string());
  AudioTable table;
  for (const auto& entry : nlohmann::json::parse(in)) {
    Spectrogram s = read_spectrogram_cache(dir / entry.at("file").get<std::string>());
    s.duration_seconds = entry.at("duration").get<double>();
    table.emplace(entry.at("id").get<std::string>(), std::move(s));
  }
  return table;
}

std::vector<DurationSummary> audio_duration_report(const corpus::Dataset& dataset,
                                                   const AudioTable& table) {
  std::vector<DurationSummary> rows(dataset.classes.size() + 1);
  for (std::size_t c = 0; c < dataset.classes.size(); ++c) rows[c].name = dataset.classes[c];
  rows.back().name = "all";
  for (auto& r : rows) r.min = std::numeric_limits<double>::infinity();
  for (const auto& post : dataset.posts) {
    const auto it = table.find(post.id);
    if (it == table.end()) throw Error(ErrorKind::kMissingModality, "no audio for post " + post.id);
    const double d = it->second.duration_seconds;
    for (auto* r : {&rows[post.label], &rows.back()}) {
      ++r->count;
      r->min = std::min(r->min, d);
      r->max = std::max(r->max, d);
      r->avg += d;
    }
  }
  for (auto& r : rows) {
    if (r.count == 0) {
      r.min = 0.0;
    } else {
      r.avg /= static_cast<double>(r.count);
    }
  }
  return rows;
}

nlohmann::json duration_report_json(const std::vector<DurationSummary>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"class", r.name},
                   {"count", r.count},
                   {"min_seconds", r.min},
                   {"max_seconds", r.max},
                   {"avg_seconds", r.avg}});
  }
  return out;
}

void to_json(nlohmann::json& j, const AudioTeacherConfig& c) {
  j = {{"patch_size", c.patch_size},
       {"overlap", c.overlap},
       {"width", c.width},
       {"layers", c.layers},
       {"heads", c.heads},
       {"dropout", c.dropout},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"early_stop_patience", c.early_stop_patience},
       {"plateau_patience", c.plateau_patience},
       {"plateau_factor", c.plateau_factor},
       {"batch_size", c.batch_size},
       {"max_frames", c.max_frames},
       {"seed", c.seed},
       {"allow_out_of_space", c.allow_out_of_space}};
}

void from_json(const nlohmann::json& j, AudioTeacherConfig& c) {
  c.patch_size = j.value("patch_size", c.patch_size);
  c.overlap = j.value("overlap", c.overlap);
  c.width = j.value("width", c.width);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.dropout = j.value("dropout", c.dropout);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.seed = j.value("seed", c.seed);
  c.allow_out_of_space = j.value("allow_out_of_space", c.allow_out_of_space);
}

AudioTeacher::AudioTeacher(AudioTable table, NormStats stats, AudioTeacherConfig cfg,
                           std::vector<std::string> classes)
    : table_(std::move(table)), stats_(std::move(stats)), cfg_(cfg), classes_(std::move(classes)) {
  max_grid_ = patch_grid(cfg_.max_frames, cfg_.patch_size, cfg_.overlap);
  if (cfg_.width % cfg_.heads != 0) {
    throw Error(ErrorKind::kIncompatibleHead, std::to_string(cfg_.heads) +
                                                  " heads do not divide audio width " +
                                                  std::to_string(cfg_.width));
  }
  std::mt19937_64 rng(cfg_.seed);
  const auto patch_dim = static_cast<Eigen::Index>(cfg_.patch_size) * cfg_.patch_size;
  projection_ = nn::Linear(patch_dim, cfg_.width, rng);
  cls_ = nn::Var::parameter(nn::gaussian(1, cfg_.width, 0.02, rng));
  freq_pos_ = nn::Var::parameter(nn::gaussian(max_grid_.n_freq, cfg_.width, 0.02, rng));
  time_pos_ = nn::Var::parameter(nn::gaussian(max_grid_.n_time, cfg_.width, 0.02, rng));
  nn::TransformerConfig tc;
  tc.width = cfg_.width;
  tc.layers = cfg_.layers;
  tc.heads = cfg_.heads;
  tc.dropout = cfg_.dropout;
  tc.activation = nn::Activation::kGelu;
  encoder_ = nn::TransformerEncoder(tc, rng);
  head_ = nn::Linear(cfg_.width, static_cast<Eigen::Index>(classes_.size()), rng);
}

PatchSequence AudioTeacher::features(const std::string& post_id) const {
  const auto it = table_.find(post_id);
  if (it == table_.end()) throw Error(ErrorKind::kMissingModality, "no audio for post " + post_id);
  return extract_patches(normalize_spectrogram(truncate_frames(it->second, cfg_.max_frames), stats_),
                         cfg_.patch_size, cfg_.overlap);
}

nn::Var AudioTeacher::summary(const PatchSequence& seq, const nn::ForwardMode& mode) const {
  std::vector<std::size_t> f_idx, t_idx;
  for (const auto& [f, t] : seq.positions) {
    f_idx.push_back(static_cast<std::size_t>(f));
    t_idx.push_back(static_cast<std::size_t>(t));
  }
  nn::Var x = projection_.forward(nn::Var::constant(seq.patches));
  x = nn::add(x, nn::add(nn::gather_rows(freq_pos_, f_idx), nn::gather_rows(time_pos_, t_idx)));
  const nn::Var parts[] = {cls_, x};
  const nn::Var h = encoder_.forward(nn::concat_rows(parts), mode);
  return nn::slice_rows(h, 0, 1);
}

nn::Var AudioTeacher::logits(const PatchSequence& seq, const nn::ForwardMode& mode) const {
  return head_.forward(summary(seq, mode));
}

std::vector<double> AudioTeacher::predict_proba(const corpus::Post& post) const {
  const nn::Matrix scores = sigmoid_row(logits(features(post.id), {}).value());
  return renormalize(std::vector<double>(scores.data(), scores.data() + scores.size()));
}

void AudioTeacher::collect(nn::ParameterList& out) const {
  projection_.collect(out);
  out.push_back(cls_);
  out.push_back(freq_pos_);
  out.push_back(time_pos_);
  encoder_.collect(out);
  head_.collect(out);
}

std::string AudioTeacher::checksum() const {
  nn::ParameterList params;
  collect(params);
  return nn::checksum(params);
}

void AudioTeacher::save(const std::filesystem::path& dir) const {
  nn::ParameterList params;
  collect(params);
  nlohmann::json manifest = {{"kind", "audio-teacher"},
                             {"config", cfg_},
                             {"classes", classes_},
                             {"norm_stats", stats_}};
  nn::write_checkpoint(dir, std::move(manifest), params);
  save_audio_table(table_, dir / "spectrograms");
}

AudioTeacher AudioTeacher::load(const std::filesystem::path& dir) {
  const auto ckpt = nn::read_checkpoint(dir);
  const auto& m = ckpt.manifest;
  if (m.value("kind", "") != "audio-teacher") {
    throw Error(ErrorKind::kIoError, dir.string() + " is not an audio-teacher checkpoint");
  }
  AudioTeacher t(load_audio_table(dir / "spectrograms"), m.at("norm_stats").get<NormStats>(),
                 m.at("config").get<AudioTeacherConfig>(),
                 m.at("classes").get<std::vector<std::string>>());
  nn::ParameterList params;
  t.collect(params);
  nn::restore(params, ckpt.params);
  return t;
}

TrainedAudioTeacher train_audio_teacher(const corpus::Dataset& dataset, const AudioTable& table,
                                        const corpus::Fold& fold, const AudioTeacherConfig& cfg) {
  if (!cfg.allow_out_of_space) {
    experiment::require_in_space(experiment::audio_teacher_space(),
                                 {{"dropout", cfg.dropout},
                                  {"layers", cfg.layers},
                                  {"heads", cfg.heads},
                                  {"lr", cfg.lr},
                                  {"patience", cfg.plateau_patience},
                                  {"factor", cfg.plateau_factor}});
  }
  std::vector<Spectrogram> train_specs;
  for (const auto* part : {&fold.train, &fold.val}) {
    for (const auto& id : *part) {
      const auto it = table.find(id);
      if (it == table.end()) throw Error(ErrorKind::kMissingModality, "no audio for post " + id);
      if (part == &fold.train) train_specs.push_back(truncate_frames(it->second, cfg.max_frames));
    }
  }
  if (train_specs.empty()) throw Error(ErrorKind::kEmptyDataset, "no training posts for the audio teacher");
  auto stats = compute_norm_stats(train_specs, "train");
  auto teacher = std::make_shared<AudioTeacher>(table, std::move(stats), cfg, dataset.classes);

  const auto train = dataset.indices_of(fold.train);
  const auto val = dataset.indices_of(fold.val);
  std::vector<PatchSequence> train_x, val_x;
  for (auto i : train) train_x.push_back(teacher->features(dataset.posts[i].id));
  for (auto i : val) val_x.push_back(teacher->features(dataset.posts[i].id));
  const std::size_t n_classes = dataset.classes.size();

  nn::ParameterList params;
  teacher->collect(params);
  nn::TrainLoopConfig loop;
  loop.epochs = cfg.epochs;
  loop.batch_size = cfg.batch_size;
  loop.lr = cfg.lr;
  loop.weight_decay = cfg.weight_decay;
  loop.early_stop_patience = val.empty() ? 0 : cfg.early_stop_patience;
  loop.plateau = nn::PlateauConfig{cfg.plateau_patience, cfg.plateau_factor};
  loop.seed = cfg.seed;

  const auto batch_loss = [&](std::span<const std::size_t> batch, const nn::ForwardMode& mode) {
    std::vector<nn::Var> rows;
    nn::Matrix targets(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(n_classes));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      rows.push_back(teacher->logits(train_x[batch[k]], mode));
      targets.row(static_cast<Eigen::Index>(k)) = one_hot(dataset.posts[train[batch[k]]].label, n_classes);
    }
    return nn::bce_with_logits(nn::concat_rows(rows), targets);
  };
  nn::Validate validate;
  if (!val.empty()) {
    validate = [&]() {
      std::vector<std::size_t> truth, pred;
      double loss = 0.0;
      for (std::size_t k = 0; k < val.size(); ++k) {
        const std::size_t label = dataset.posts[val[k]].label;
        const nn::Var z = teacher->logits(val_x[k], {});
        loss += nn::bce_with_logits(z, one_hot(label, n_classes)).scalar();
        const nn::Matrix s = sigmoid_row(z.value());
        truth.push_back(label);
        pred.push_back(eval::argmax(std::span<const double>(s.data(), static_cast<std::size_t>(s.size()))));
      }
      return nn::Validation{eval::confusion_metrics(truth, pred, dataset.classes).weighted_f1,
                            loss / static_cast<double>(val.size())};
    };
  }

  TrainedAudioTeacher out;
  out.log = nn::run_training(params, loop, train.size(), batch_loss, validate);
  out.teacher = teacher;
  out.validation = evaluate_teacher(*teacher, dataset, fold.val);
  return out;
}

}  // namespace mmkd::audio
