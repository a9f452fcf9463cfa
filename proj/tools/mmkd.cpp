// Command-line front end. Every subcommand takes the same experiment
// options (--config or --toy, plus overrides) and exits nonzero with a
// stage-tagged message on failure.

#include "mmkd/error.hpp"
#include "mmkd/eval/pca.hpp"
#include "mmkd/experiment/ablation.hpp"
#include "mmkd/experiment/runner.hpp"
#include "mmkd/experiment/search.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace mmkd;
using namespace mmkd::experiment;
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  bool toy = false;
  std::size_t toy_posts = 40;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::optional<std::size_t> max_folds;
  bool allow_out_of_space = false;
  bool no_resume = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "experiment config (JSON)");
  cmd->add_flag("--toy", o.toy, "use the built-in toy experiment");
  cmd->add_option("--toy-posts", o.toy_posts, "posts in the toy corpus");
  cmd->add_option("--seed", o.seed, "experiment seed");
  cmd->add_option("-o,--output", o.output, "output directory (relative to $MMKD_ARTIFACT_ROOT)");
  cmd->add_option("--max-folds", o.max_folds, "run only the first N folds");
  cmd->add_flag("--allow-out-of-space", o.allow_out_of_space, "accept hyperparameters outside the search spaces");
  cmd->add_flag("--no-resume", o.no_resume, "retrain instead of loading stored checkpoints");
}

ExperimentConfig build_config(const CommonOptions& o) {
  if (o.config.empty() == !o.toy) {
    throw StageError("config", Error(ErrorKind::kInvalidConfig, "give exactly one of --config and --toy"));
  }
  ExperimentConfig cfg;
  try {
    cfg = o.toy ? toy_experiment(o.toy_posts, o.seed.value_or(7)) : load_config(o.config);
  } catch (const Error& e) {
    throw StageError("config", e);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.output.empty()) cfg.output_dir = o.output;
  if (o.max_folds) cfg.max_folds = *o.max_folds;
  if (o.allow_out_of_space) cfg.allow_out_of_space = true;
  if (o.no_resume) cfg.resume = false;
  return cfg;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

nlohmann::json record_json(const TeacherRecord& r) {
  return {{"modality", modality_name(r.modality)}, {"key", r.key}, {"checksum", r.checksum},
          {"reused", r.reused}, {"dir", r.dir.string()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal multi-teacher distillation toolkit"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::size_t fold = 0;
  std::string modality = "text";
  std::string backend;
  std::string wav_dir;
  int patch_size = 16;
  int overlap = -1;
  std::size_t budget = 50;
  std::string suite;
  std::size_t per_group = 10;

  auto* ingest = app.add_subcommand("ingest", "load the dataset, write statistics and splits");
  auto* train_teacher = app.add_subcommand("train-teacher", "fine-tune one teacher for a fold");
  train_teacher->add_option("--modality", modality, "text, emotion or audio")
      ->check(CLI::IsMember({"text", "emotion", "audio"}));
  auto* synth = app.add_subcommand("synthesize-audio", "synthesize and featurize every post");
  synth->add_option("--backend", backend, "TTS backend id");
  synth->add_option("--wav-dir", wav_dir, "also write one WAV per post here");
  auto* featurize = app.add_subcommand("featurize", "report the patch grid of every post");
  featurize->add_option("--patch-size", patch_size, "square patch size");
  featurize->add_option("--overlap", overlap, "patch overlap (-1: default for the size)");
  auto* cache = app.add_subcommand("cache-teacher-outputs", "run the teacher set over every post");
  auto* train_student = app.add_subcommand("train-student", "distill the student for a fold");
  auto* evaluate = app.add_subcommand("evaluate", "run the full pipeline and report metrics");
  auto* search = app.add_subcommand("search", "student hyperparameter search");
  search->add_option("--budget", budget, "number of trials");
  auto* ablate = app.add_subcommand("ablate", "run an ablation suite");
  ablate->add_option("--suite", suite, "teacher-combos, plm-swap, fusion-modes or patch-sweep")->required();
  auto* viz = app.add_subcommand("viz-pca", "PCA scatter of spectrograms per duration bin");
  viz->add_option("--per-group", per_group, "samples per class and bin");

  for (auto* cmd : {ingest, train_teacher, synth, featurize, cache, train_student, evaluate, search, ablate, viz}) {
    add_common(cmd, opts);
  }
  for (auto* cmd : {train_teacher, cache, train_student}) cmd->add_option("--fold", fold, "fold index");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = build_config(opts);
    if (synth->parsed() && !backend.empty()) cfg.tts_backend = backend;
    if (featurize->parsed()) {
      cfg.audio_teacher.patch_size = patch_size;
      cfg.audio_teacher.overlap = overlap;
    }

    if (search->parsed()) {
      const auto r = search_student(cfg, budget);
      print_json({{"best", trial_json(r.best)}, {"trials", r.trials.size()}});
      return 0;
    }
    if (ablate->parsed()) {
      const auto which = in_stage("config", [&] { return parse_suite(suite); });
      const auto r = ablation_suite(cfg, which);
      std::cout << std::ifstream(r.dir / "table.txt").rdbuf();
      std::cout << "written to " << r.dir.string() << '\n';
      return 0;
    }

    ExperimentRunner runner(cfg);
    if (ingest->parsed()) {
      runner.plan();
      print_json(corpus::compute_stats(runner.dataset()));
    } else if (train_teacher->parsed()) {
      const Modality m = parse_modality(modality);
      runner.teacher(m, fold);
      print_json(record_json(runner.teacher_record(m, fold)));
    } else if (synth->parsed()) {
      const auto& table = runner.audio_table();
      if (!wav_dir.empty()) {
        in_stage("audio-synthesis", [&] {
          audio::build_audio_table(runner.dataset(), *audio::make_tts_backend(cfg.tts_backend, *runner.config().seed),
                                   artifact_path(wav_dir));
        });
      }
      print_json(audio::duration_report_json(audio::audio_duration_report(runner.dataset(), table)));
    } else if (featurize->parsed()) {
      const auto& table = runner.audio_table();
      const auto& c = runner.config().audio_teacher;
      nlohmann::json report = {{"patch_size", c.patch_size}, {"max_frames", c.max_frames}, {"posts", nlohmann::json::object()}};
      in_stage("featurize", [&] {
        for (const auto& [id, spec] : table) {
          const auto grid = audio::patch_grid(std::min(spec.frames(), c.max_frames), c.patch_size, c.overlap);
          report["overlap"] = grid.overlap;
          report["posts"][id] = {{"frames", spec.frames()}, {"patches", grid.size()}};
        }
        fs::create_directories(runner.dir());
        std::ofstream(runner.dir() / "featurize.json") << report.dump(2) << '\n';
      });
      std::cout << "patch grid of " << table.size() << " posts written to "
                << (runner.dir() / "featurize.json").string() << '\n';
    } else if (cache->parsed()) {
      const auto& outputs = runner.teacher_outputs(fold);
      std::cout << outputs.outputs.size() << " posts cached in "
                << (runner.dir() / ("fold_" + std::to_string(fold)) / "teacher_outputs.json").string() << '\n';
    } else if (train_student->parsed()) {
      const auto o = runner.run_fold(fold);
      print_json({{"fold", fold}, {"student_checksum", o.student_checksum}, {"reused", o.student_reused},
                  {"train", o.train}});
    } else if (evaluate->parsed()) {
      const auto r = runner.run();
      const nlohmann::json cv = r.evaluation;
      print_json({{"pooled", cv.at("pooled")}, {"fold_mean", cv.at("fold_mean")}});
    } else if (viz->parsed()) {
      const auto& table = runner.audio_table();
      const auto& ds = runner.dataset();
      std::vector<eval::PcaSample> samples;
      for (const auto& p : ds.posts) {
        const auto& spec = table.at(p.id);
        samples.push_back({p.id, spec.values, p.label, spec.duration_seconds});
      }
      // Bins without enough clips of every class are skipped, not fatal.
      std::vector<eval::DurationBin> bins;
      const auto all_bins = eval::default_duration_bins();
      for (std::size_t b = 0; b < all_bins.size(); ++b) {
        std::vector<std::size_t> counts(ds.classes.size(), 0);
        for (const auto& smp : samples) {
          const bool inside = (b == 0 ? smp.duration >= all_bins[b].lo : smp.duration > all_bins[b].lo) &&
                              smp.duration <= all_bins[b].hi;
          if (inside) ++counts[smp.label];
        }
        if (*std::min_element(counts.begin(), counts.end()) < per_group) {
          std::cout << "skipping bin " << all_bins[b].name << ": fewer than " << per_group
                    << " clips of some class\n";
          continue;
        }
        auto bin = all_bins[b];
        if (b > 0 && bins.empty()) bin.lo = std::nextafter(bin.lo, bin.hi);
        bins.push_back(bin);
      }
      if (bins.empty()) {
        throw StageError("viz-pca", Error(ErrorKind::kInsufficientSamples, "no duration bin has enough clips"));
      }
      const auto projections = in_stage("viz-pca", [&] {
        auto proj = eval::pca_spectrograms(samples, ds.classes.size(), per_group, *runner.config().seed, bins);
        eval::write_pca_plot(proj, ds.classes, runner.dir() / "pca" / "pca.svg");
        return proj;
      });
      for (const auto& p : projections) {
        std::cout << p.bin.name << ": " << p.ids.size() << " samples, explained variance " << p.pca.variance[0]
                  << ", " << p.pca.variance[1] << '\n';
      }
      std::cout << "written to " << (runner.dir() / "pca").string() << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: [unknown stage] " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
