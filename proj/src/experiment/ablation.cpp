#include "mmkd/experiment/ablation.hpp"

#include "mmkd/error.hpp"
#include "mmkd/experiment/runner.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>

namespace mmkd::experiment {

namespace fs = std::filesystem;

namespace {

constexpr int kPatchSizes[] = {2, 4, 8, 16, 32, 64};
constexpr const char* kPlmBackends[] = {"toy-deterministic", "bert-base-uncased", "roberta-base",
                                        "mental-bert", "clinical-bert"};

std::string yes_no(bool b) { return b ? "yes" : "no"; }

AblationVariant variant(const ExperimentConfig& base, const fs::path& root, std::string name,
                        std::vector<std::pair<std::string, std::string>> flags) {
  AblationVariant v{std::move(name), std::move(flags), base};
  std::string slug = v.name;
  for (char& c : slug) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') c = '_';
  }
  v.config.output_dir = (root / slug).string();
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string_view suite_name(AblationSuite suite) {
  switch (suite) {
    case AblationSuite::kTeacherCombos: return "teacher-combos";
    case AblationSuite::kPlmSwap: return "plm-swap";
    case AblationSuite::kFusionModes: return "fusion-modes";
    case AblationSuite::kPatchSweep: return "patch-sweep";
  }
  return "?";
}

AblationSuite parse_suite(std::string_view name) {
  for (auto s : {AblationSuite::kTeacherCombos, AblationSuite::kPlmSwap, AblationSuite::kFusionModes,
                 AblationSuite::kPatchSweep}) {
    if (suite_name(s) == name) return s;
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown ablation suite '" + std::string(name) + "'");
}

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& raw, AblationSuite suite) {
  const ExperimentConfig base = resolve(raw);
  const fs::path root = fs::path(base.output_dir) / "ablation" / std::string(suite_name(suite));
  std::vector<AblationVariant> out;
  switch (suite) {
    case AblationSuite::kTeacherCombos: {
      using M = Modality;
      const std::vector<std::vector<M>> combos = {
          {M::kText}, {M::kText, M::kEmotion}, {M::kText, M::kAudio}, {M::kText, M::kEmotion, M::kAudio}};
      for (const auto& set : combos) {
        const bool emo = std::ranges::find(set, M::kEmotion) != set.end();
        const bool aud = std::ranges::find(set, M::kAudio) != set.end();
        std::string name = "text";
        if (emo) name += "+emotion";
        if (aud) name += "+audio";
        auto v = variant(base, root, name, {{"text", "yes"}, {"emotion", yes_no(emo)}, {"audio", yes_no(aud)}});
        v.config.student.teacher_set = set;
        out.push_back(std::move(v));
      }
      break;
    }
    case AblationSuite::kPlmSwap:
      for (const char* backend : kPlmBackends) {
        auto v = variant(base, root, backend, {{"backend", backend}});
        v.config.text_backend = backend;
        out.push_back(std::move(v));
      }
      break;
    case AblationSuite::kFusionModes:
      for (auto mode : distill::all_fusion_modes()) {
        auto v = variant(base, root, std::string(distill::fusion_mode_name(mode)),
                         {{"input", std::string(distill::fusion_mode_name(mode))}, {"init", "backbone"}});
        v.config.student.fusion = mode;
        v.config.student.vanilla = false;
        out.push_back(std::move(v));
      }
      {
        auto v = variant(base, root, "vanilla-transformer", {{"input", "text-only"}, {"init", "random"}});
        v.config.student.fusion = distill::FusionMode::kTextOnly;
        v.config.student.vanilla = true;
        out.push_back(std::move(v));
      }
      break;
    case AblationSuite::kPatchSweep:
      for (int p : kPatchSizes) {
        auto v = variant(base, root, "patch-" + std::to_string(p), {{"patch_size", std::to_string(p)}});
        v.config.audio_teacher.patch_size = p;
        v.config.audio_teacher.overlap = -1;
        out.push_back(std::move(v));
      }
      break;
  }
  return out;
}

AblationResult ablation_suite(const ExperimentConfig& raw, AblationSuite suite) {
  const ExperimentConfig base = resolve(raw);
  AblationResult result;
  result.suite = suite;
  result.dir = fs::path(base.output_dir) / "ablation" / std::string(suite_name(suite));
  for (auto& v : ablation_variants(base, suite)) {
    AblationRow row;
    row.row.name = v.name;
    row.row.flags = v.flags;
    row.dir = v.config.output_dir;
    try {
      ExperimentRunner runner(v.config);
      const auto r = runner.run();
      row.row.report = r.evaluation.pooled;
      for (const auto& t : r.folds.front().teachers) {
        row.teacher_checksums[std::string(modality_name(t.modality))] = t.checksum;
      }
      if (suite == AblationSuite::kPatchSweep) {
        std::vector<std::size_t> gold, pred;
        const auto& ds = runner.dataset();
        for (std::size_t k = 0; k < runner.fold_count(); ++k) {
          const auto teacher = runner.audio_teacher(k);
          for (const auto& id : runner.plan().folds[k].test) {
            const auto& post = ds.post(id);
            gold.push_back(post.label);
            pred.push_back(eval::argmax(teacher->predict_proba(post)));
          }
        }
        row.audio_teacher = eval::confusion_metrics(gold, pred, ds.classes);
      }
    } catch (const std::exception& e) {
      row.row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }

  in_stage("ablation", [&] {
    fs::create_directories(result.dir);
    std::vector<eval::TableRow> rows;
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : result.rows) {
      rows.push_back(r.row);
      nlohmann::json e = {{"name", r.row.name}, {"dir", r.dir.string()}, {"teachers", r.teacher_checksums}};
      for (const auto& [k, v] : r.row.flags) e["flags"][k] = v;
      if (r.row.error.empty()) {
        e["metrics"] = r.row.report;
      } else {
        e["error"] = r.row.error;
      }
      if (r.audio_teacher) e["audio_teacher"] = *r.audio_teacher;
      j.push_back(std::move(e));
    }
    std::ofstream(result.dir / "rows.json") << nlohmann::json{{"suite", suite_name(suite)}, {"rows", j}}.dump(2)
                                            << '\n';
    eval::emit_tables(rows, result.dir / "table");
    if (suite == AblationSuite::kPatchSweep) {
      std::ofstream csv(result.dir / "patch_sweep.csv");
      csv << "patch_size,weighted_f1,audio_teacher_weighted_f1,error\n";
      for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& r = result.rows[i];
        csv << kPatchSizes[i] << ',';
        if (r.row.error.empty()) {
          csv << fmt(r.row.report.weighted_f1) << ',' << fmt(r.audio_teacher->weighted_f1) << ",\n";
        } else {
          csv << ",,failed\n";
        }
      }
      write_patch_sweep_plot(result, result.dir / "patch_sweep.svg");
    }
  });
  return result;
}

void write_patch_sweep_plot(const AblationResult& result, const fs::path& svg) {
  constexpr double kW = 480, kH = 320, kPad = 48;
  const auto x_of = [&](std::size_t i) {
    return kPad + (kW - 2 * kPad) * static_cast<double>(i) / static_cast<double>(std::size(kPatchSizes) - 1);
  };
  const auto y_of = [&](double f1) { return kH - kPad - (kH - 2 * kPad) * f1; };
  std::ofstream out(svg);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + svg.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\">patch size</text>\n"
      << "<text x=\"12\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 12 " << kH / 2
      << ")\" text-anchor=\"middle\">weighted F1</text>\n";
  std::string points;
  for (std::size_t i = 0; i < result.rows.size() && i < std::size(kPatchSizes); ++i) {
    out << "<text x=\"" << x_of(i) << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"middle\">"
        << kPatchSizes[i] << "</text>\n";
    if (!result.rows[i].row.error.empty()) continue;
    const double x = x_of(i), y = y_of(result.rows[i].row.report.weighted_f1);
    points += fmt(x) + "," + fmt(y) + " ";
    out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"" << points << "\"/>\n</svg>\n";
}

}  // namespace mmkd::experiment
