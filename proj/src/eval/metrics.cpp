#include "mmkd/eval/metrics.hpp"

#include "mmkd/error.hpp"

#include <algorithm>

namespace mmkd::eval {

MetricsReport confusion_metrics(std::span<const std::size_t> y_true,
                                std::span<const std::size_t> y_pred,
                                const std::vector<std::string>& classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::kLengthMismatch,
                "y_true has " + std::to_string(y_true.size()) + " labels, y_pred " +
                    std::to_string(y_pred.size()));
  }
  const std::size_t n_classes = classes.size();
  MetricsReport r;
  r.classes = classes;
  r.total = y_true.size();
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= n_classes || y_pred[i] >= n_classes) {
      throw Error(ErrorKind::kUnknownLabel, "label out of range at position " + std::to_string(i));
    }
    ++r.confusion[y_true[i]][y_pred[i]];
  }

  std::size_t correct = 0;
  r.support.assign(n_classes, 0);
  r.precision.assign(n_classes, 0.0);
  r.recall.assign(n_classes, 0.0);
  r.per_class_f1.assign(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    correct += r.confusion[c][c];
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < n_classes; ++t) {
      r.support[c] += r.confusion[c][t];
      predicted += r.confusion[t][c];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    r.recall[c] = r.support[c] > 0 ? tp / static_cast<double>(r.support[c]) : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.per_class_f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
  }

  if (r.total > 0) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
    for (std::size_t c = 0; c < n_classes; ++c) {
      r.weighted_f1 += r.per_class_f1[c] * static_cast<double>(r.support[c]);
    }
    r.weighted_f1 /= static_cast<double>(r.total);
  }
  if (n_classes > 0) {
    for (double f : r.per_class_f1) r.macro_f1 += f;
    r.macro_f1 /= static_cast<double>(n_classes);
  }
  return r;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"classes", r.classes},       {"accuracy", r.accuracy},
       {"macro_f1", r.macro_f1},     {"weighted_f1", r.weighted_f1},
       {"per_class_f1", r.per_class_f1}, {"precision", r.precision},
       {"recall", r.recall},         {"support", r.support},
       {"confusion", r.confusion},   {"total", r.total}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  j.at("classes").get_to(r.classes);
  j.at("accuracy").get_to(r.accuracy);
  j.at("macro_f1").get_to(r.macro_f1);
  j.at("weighted_f1").get_to(r.weighted_f1);
  j.at("per_class_f1").get_to(r.per_class_f1);
  j.at("precision").get_to(r.precision);
  j.at("recall").get_to(r.recall);
  j.at("support").get_to(r.support);
  j.at("confusion").get_to(r.confusion);
  j.at("total").get_to(r.total);
}

}  // namespace mmkd::eval
