#include "mmkd/teacher.hpp"

#include "mmkd/error.hpp"

#include <numeric>

namespace mmkd {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kEmotion: return "emotion";
    case Modality::kAudio: return "audio";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  if (name == "text") return Modality::kText;
  if (name == "emotion" || name == "emo") return Modality::kEmotion;
  if (name == "audio" || name == "aud") return Modality::kAudio;
  throw Error(ErrorKind::kInvalidConfig, "unknown modality '" + std::string(name) + "'");
}

std::vector<double> renormalize(std::vector<double> scores) {
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  if (total <= 0.0) {
    const double u = scores.empty() ? 0.0 : 1.0 / static_cast<double>(scores.size());
    for (auto& s : scores) s = u;
    return scores;
  }
  for (auto& s : scores) s /= total;
  return scores;
}

eval::MetricsReport evaluate_teacher(const Teacher& teacher, const corpus::Dataset& dataset,
                                     const std::vector<std::string>& ids) {
  std::vector<std::size_t> truth, pred;
  truth.reserve(ids.size());
  pred.reserve(ids.size());
  for (const auto& id : ids) {
    const auto& post = dataset.post(id);
    truth.push_back(post.label);
    pred.push_back(eval::argmax(teacher.predict_proba(post)));
  }
  return eval::confusion_metrics(truth, pred, dataset.classes);
}

}  // namespace mmkd
