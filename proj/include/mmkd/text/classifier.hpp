#pragma once

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/nn/layers.hpp"
#include "mmkd/text/encoder.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmkd::text {

// Transformer classification block stacked on the encoder backbone.
struct HeadConfig {
  int layers = 2;
  int heads = 2;
  double dropout = 0.1;
  nn::Activation activation = nn::Activation::kRelu;
};

// IncompatibleHead when heads do not divide the width; RangeError for
// layer/head counts outside [2, 12] or dropout outside [0, 1).
void validate_head(const HeadConfig& head, Eigen::Index width);

std::string activation_name(nn::Activation a);
nn::Activation parse_activation(std::string_view name);
void to_json(nlohmann::json& j, const HeadConfig& h);
void from_json(const nlohmann::json& j, HeadConfig& h);

// Encoder backbone + transformer head over [summary; token states]; the
// head's summary-position output feeds a linear layer over the classes.
class TextClassifier {
 public:
  TextClassifier(TextEncoder encoder, HeadConfig head, std::size_t num_classes,
                 std::uint64_t seed);

  // (n + 1) x d: summary state first, then the contextual token states.
  nn::Var sequence(const corpus::Post& post) const;
  nn::Var logits_from_sequence(const nn::Var& sequence, const nn::ForwardMode& mode) const;
  nn::Var logits(const corpus::Post& post, const nn::ForwardMode& mode) const;
  std::vector<double> predict_proba(const corpus::Post& post) const;

  const TextEncoder& encoder() const { return encoder_; }
  const HeadConfig& head_config() const { return head_cfg_; }
  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t seed() const { return seed_; }
  void collect(nn::ParameterList& out) const;

 private:
  TextEncoder encoder_;
  HeadConfig head_cfg_;
  std::size_t num_classes_;
  std::uint64_t seed_;
  nn::TransformerEncoder head_;
  nn::Linear output_;
};

std::vector<double> softmax(const nn::Matrix& logits_row);

}  // namespace mmkd::text
