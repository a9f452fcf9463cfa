#pragma once

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/distill/losses.hpp"
#include "mmkd/teacher.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mmkd::distill {

// Frozen-teacher predictions per post id, computed once and read-only
// during student training.
struct TeacherCache {
  std::string dataset;
  std::vector<std::string> classes;
  std::map<std::string, std::vector<TeacherOutput>> outputs;

  // Mean over the outputs of the requested modalities. MissingTeacherOutput
  // when the post or any requested modality is absent.
  std::vector<double> soft_targets(const std::string& post_id,
                                   std::span<const Modality> teacher_set) const;
};

// Scores every post of `dataset` with every teacher. Outputs must be
// distributions over the dataset classes (ClassMismatch / RangeError).
TeacherCache build_teacher_cache(std::span<const Teacher* const> teachers,
                                 const corpus::Dataset& dataset);

void save_teacher_cache(const TeacherCache& cache, const std::filesystem::path& path);
TeacherCache load_teacher_cache(const std::filesystem::path& path);

}  // namespace mmkd::distill
