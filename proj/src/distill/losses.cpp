#include "mmkd/distill/losses.hpp"

#include "mmkd/error.hpp"

#include <algorithm>
#include <cmath>

namespace mmkd::distill {

namespace {

void require_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw Error(ErrorKind::kInvalidConfig, "temperature must be positive");
  }
}

}  // namespace

std::vector<double> teacher_soft_targets(std::span<const std::vector<double>> outputs) {
  if (outputs.empty()) throw Error(ErrorKind::kInvalidConfig, "no teacher outputs to average");
  const std::size_t c = outputs.front().size();
  std::vector<const std::vector<double>*> order;
  for (const auto& o : outputs) {
    if (o.size() != c) {
      throw Error(ErrorKind::kClassMismatch, "teacher outputs have " + std::to_string(c) +
                                                 " and " + std::to_string(o.size()) +
                                                 " classes");
    }
    order.push_back(&o);
  }
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return *a < *b; });
  std::vector<double> mean(c, 0.0);
  for (const auto* o : order) {
    for (std::size_t k = 0; k < c; ++k) mean[k] += (*o)[k];
  }
  for (auto& v : mean) v /= static_cast<double>(outputs.size());
  return mean;
}

std::vector<double> teacher_soft_targets(std::span<const TeacherOutput> outputs) {
  std::vector<std::vector<double>> probs;
  probs.reserve(outputs.size());
  for (const auto& o : outputs) probs.push_back(o.probs);
  return teacher_soft_targets(std::span<const std::vector<double>>(probs));
}

std::vector<double> soften(std::span<const double> probs, double temperature) {
  require_temperature(temperature);
  std::vector<double> out(probs.begin(), probs.end());
  if (temperature == 1.0) return out;
  double total = 0.0;
  for (auto& v : out) {
    v = v > 0.0 ? std::pow(v, 1.0 / temperature) : 0.0;
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

double kd_loss(std::span<const double> student_probs, std::span<const double> soft_targets,
               double temperature) {
  if (student_probs.size() != soft_targets.size()) {
    throw Error(ErrorKind::kClassMismatch, "student and teacher distributions differ in length");
  }
  const auto s = soften(student_probs, temperature);
  const auto t = soften(soft_targets, temperature);
  double kl = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] <= 0.0) continue;
    kl += t[k] * (std::log(t[k]) - std::log(std::max(s[k], kProbFloor)));
  }
  return kl;
}

double task_loss(std::span<const double> student_probs, std::size_t gold) {
  if (gold >= student_probs.size()) throw Error(ErrorKind::kRangeError, "gold label out of range");
  return -std::log(std::max(student_probs[gold], kProbFloor));
}

double task_loss(std::span<const std::vector<double>> student_probs,
                 std::span<const std::size_t> gold) {
  if (student_probs.size() != gold.size()) {
    throw Error(ErrorKind::kLengthMismatch, "predictions and labels differ in length");
  }
  if (gold.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) total += task_loss(student_probs[i], gold[i]);
  return total / static_cast<double>(gold.size());
}

nn::Var kd_loss(const nn::Var& logits, std::span<const double> soft_targets,
                double temperature) {
  require_temperature(temperature);
  if (static_cast<std::size_t>(logits.cols()) != soft_targets.size()) {
    throw Error(ErrorKind::kClassMismatch, "student and teacher distributions differ in length");
  }
  const auto t = soften(soft_targets, temperature);
  nn::Matrix weights(1, logits.cols());
  double entropy_term = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    weights(0, static_cast<Eigen::Index>(k)) = t[k];
    if (t[k] > 0.0) entropy_term += t[k] * std::log(t[k]);
  }
  const nn::Var scaled = temperature == 1.0 ? logits : nn::scale(logits, 1.0 / temperature);
  const nn::Var log_p = nn::clamp_min(nn::log_softmax_rows(scaled), std::log(kProbFloor));
  const nn::Var cross = nn::sum(nn::mul(log_p, nn::Var::constant(std::move(weights))));
  return nn::add(nn::scale(cross, -1.0),
                 nn::Var::constant(nn::Matrix::Constant(1, 1, entropy_term)));
}

nn::Var task_loss(const nn::Var& logits, std::size_t gold) {
  if (gold >= static_cast<std::size_t>(logits.cols())) {
    throw Error(ErrorKind::kRangeError, "gold label out of range");
  }
  const nn::Var log_p = nn::clamp_min(nn::log_softmax_rows(logits), std::log(kProbFloor));
  return nn::scale(nn::pick(log_p, 0, static_cast<Eigen::Index>(gold)), -1.0);
}

}  // namespace mmkd::distill
