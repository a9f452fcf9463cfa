#pragma once

#include "mmkd/eval/tables.hpp"
#include "mmkd/experiment/config.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmkd::experiment {

enum class AblationSuite { kTeacherCombos, kPlmSwap, kFusionModes, kPatchSweep };

std::string_view suite_name(AblationSuite suite);
AblationSuite parse_suite(std::string_view name);

struct AblationVariant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> flags;
  ExperimentConfig config;
};

// The variant list of a suite, in table order. Every variant keeps the base
// seed and teacher store; only its output directory and the varied factor
// differ.
std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base, AblationSuite suite);

struct AblationRow {
  eval::TableRow row;
  std::filesystem::path dir;
  // modality name -> teacher checkpoint checksum of fold 0
  std::map<std::string, std::string> teacher_checksums;
  // Audio teacher on the held-out posts; patch-sweep only.
  std::optional<eval::MetricsReport> audio_teacher;
};

struct AblationResult {
  AblationSuite suite = AblationSuite::kTeacherCombos;
  std::filesystem::path dir;
  std::vector<AblationRow> rows;
};

// Runs every variant; a failing variant becomes a row with `error` set.
// Writes <output_dir>/ablation/<suite>/{rows.json,table.txt,table.tsv} and,
// for the patch sweep, patch_sweep.csv and patch_sweep.svg.
AblationResult ablation_suite(const ExperimentConfig& base, AblationSuite suite);

// Line plot of weighted F1 against patch size.
void write_patch_sweep_plot(const AblationResult& result, const std::filesystem::path& svg);

}  // namespace mmkd::experiment
