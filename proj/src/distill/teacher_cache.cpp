#include "mmkd/distill/teacher_cache.hpp"

#include "mmkd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace mmkd::distill {

std::vector<double> TeacherCache::soft_targets(const std::string& post_id,
                                               std::span<const Modality> teacher_set) const {
  const auto it = outputs.find(post_id);
  if (it == outputs.end()) {
    throw Error(ErrorKind::kMissingTeacherOutput, "no teacher outputs for post " + post_id);
  }
  std::vector<std::vector<double>> chosen;
  for (Modality m : teacher_set) {
    const auto hit = std::find_if(it->second.begin(), it->second.end(),
                                  [m](const TeacherOutput& o) { return o.modality == m; });
    if (hit == it->second.end()) {
      throw Error(ErrorKind::kMissingTeacherOutput, "no " + std::string(modality_name(m)) +
                                                        " teacher output for post " + post_id);
    }
    chosen.push_back(hit->probs);
  }
  return teacher_soft_targets(std::span<const std::vector<double>>(chosen));
}

TeacherCache build_teacher_cache(std::span<const Teacher* const> teachers,
                                 const corpus::Dataset& dataset) {
  TeacherCache cache;
  cache.dataset = dataset.name;
  cache.classes = dataset.classes;
  for (const auto* teacher : teachers) {
    if (teacher->num_classes() != dataset.classes.size()) {
      throw Error(ErrorKind::kClassMismatch,
                  std::string(modality_name(teacher->modality())) + " teacher scores " +
                      std::to_string(teacher->num_classes()) + " classes, dataset has " +
                      std::to_string(dataset.classes.size()));
    }
  }
  for (const auto& post : dataset.posts) {
    auto& row = cache.outputs[post.id];
    for (const auto* teacher : teachers) {
      TeacherOutput out{teacher->modality(), teacher->predict_proba(post)};
      double total = 0.0;
      for (double p : out.probs) {
        if (!(p >= 0.0)) throw Error(ErrorKind::kRangeError, "negative teacher probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) {
        throw Error(ErrorKind::kRangeError, "teacher output for " + post.id + " sums to " +
                                                std::to_string(total));
      }
      row.push_back(std::move(out));
    }
  }
  return cache;
}

void save_teacher_cache(const TeacherCache& cache, const std::filesystem::path& path) {
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& [id, row] : cache.outputs) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& o : row) list.push_back({{"modality", modality_name(o.modality)}, {"probs", o.probs}});
    outputs[id] = std::move(list);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out << nlohmann::json{{"dataset", cache.dataset}, {"classes", cache.classes}, {"outputs", outputs}}
             .dump()
      << '\n';
}

TeacherCache load_teacher_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read " + path.string());
  const auto j = nlohmann::json::parse(in);
  TeacherCache cache;
  cache.dataset = j.at("dataset").get<std::string>();
  cache.classes = j.at("classes").get<std::vector<std::string>>();
  for (const auto& [id, list] : j.at("outputs").items()) {
    auto& row = cache.outputs[id];
    for (const auto& o : list) {
      row.push_back({parse_modality(o.at("modality").get<std::string>()),
                     o.at("probs").get<std::vector<double>>()});
    }
  }
  return cache;
}

}  // namespace mmkd::distill
