#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmkd::eval {

struct MetricsReport {
  std::vector<std::string> classes;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::size_t> support;
  // confusion[true][pred]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
};

// Per-class F1 = 2PR/(P+R), 0 when P+R = 0. Macro averages over every
// declared class, including ones absent from both sequences.
MetricsReport confusion_metrics(std::span<const std::size_t> y_true,
                                std::span<const std::size_t> y_pred,
                                const std::vector<std::string>& classes);

std::size_t argmax(std::span<const double> values);

void to_json(nlohmann::json& j, const MetricsReport& report);
void from_json(const nlohmann::json& j, MetricsReport& report);

}  // namespace mmkd::eval
