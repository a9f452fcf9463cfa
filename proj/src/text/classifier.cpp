#include "mmkd/text/classifier.hpp"

#include "mmkd/error.hpp"

#include <cmath>
#include <random>

namespace mmkd::text {

void validate_head(const HeadConfig& head, Eigen::Index width) {
  if (head.layers < 2 || head.layers > 12) {
    throw Error(ErrorKind::kRangeError, "head layers " + std::to_string(head.layers) +
                                            " outside [2, 12]");
  }
  if (head.heads < 2 || head.heads > 12) {
    throw Error(ErrorKind::kRangeError, "attention heads " + std::to_string(head.heads) +
                                            " outside [2, 12]");
  }
  if (!(head.dropout >= 0.0 && head.dropout < 1.0)) {
    throw Error(ErrorKind::kRangeError, "dropout must lie in [0, 1)");
  }
  if (width % head.heads != 0) {
    throw Error(ErrorKind::kIncompatibleHead, std::to_string(head.heads) +
                                                  " heads do not divide width " +
                                                  std::to_string(width));
  }
}

std::string activation_name(nn::Activation a) {
  return a == nn::Activation::kGelu ? "gelu" : "relu";
}

nn::Activation parse_activation(std::string_view name) {
  if (name == "relu") return nn::Activation::kRelu;
  if (name == "gelu") return nn::Activation::kGelu;
  throw Error(ErrorKind::kInvalidConfig, "unknown activation '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const HeadConfig& h) {
  j = {{"layers", h.layers},
       {"heads", h.heads},
       {"dropout", h.dropout},
       {"activation", activation_name(h.activation)}};
}

void from_json(const nlohmann::json& j, HeadConfig& h) {
  h.layers = j.value("layers", h.layers);
  h.heads = j.value("heads", h.heads);
  h.dropout = j.value("dropout", h.dropout);
  h.activation = parse_activation(j.value("activation", activation_name(h.activation)));
}

namespace {

nn::TransformerEncoder make_head(const HeadConfig& cfg, Eigen::Index width,
                                 std::mt19937_64& rng) {
  validate_head(cfg, width);
  nn::TransformerConfig tc;
  tc.width = width;
  tc.layers = cfg.layers;
  tc.heads = cfg.heads;
  tc.dropout = cfg.dropout;
  tc.activation = cfg.activation;
  return nn::TransformerEncoder(tc, rng);
}

}  // namespace

TextClassifier::TextClassifier(TextEncoder encoder, HeadConfig head, std::size_t num_classes,
                               std::uint64_t seed)
    : encoder_(std::move(encoder)), head_cfg_(head), num_classes_(num_classes), seed_(seed) {
  std::mt19937_64 rng(seed);
  head_ = make_head(head_cfg_, encoder_.spec().width, rng);
  output_ = nn::Linear(encoder_.spec().width, static_cast<Eigen::Index>(num_classes), rng);
}

nn::Var TextClassifier::sequence(const corpus::Post& post) const {
  const Encoded enc = encoder_.encode(post.text);
  const nn::Var parts[] = {enc.summary, enc.tokens};
  return nn::concat_rows(parts);
}

nn::Var TextClassifier::logits_from_sequence(const nn::Var& seq,
                                             const nn::ForwardMode& mode) const {
  const nn::Var h = head_.forward(seq, mode);
  return output_.forward(nn::slice_rows(h, 0, 1));
}

nn::Var TextClassifier::logits(const corpus::Post& post, const nn::ForwardMode& mode) const {
  return logits_from_sequence(sequence(post), mode);
}

std::vector<double> TextClassifier::predict_proba(const corpus::Post& post) const {
  return softmax(logits(post, {}).value());
}

void TextClassifier::collect(nn::ParameterList& out) const {
  encoder_.collect(out);
  head_.collect(out);
  output_.collect(out);
}

std::vector<double> softmax(const nn::Matrix& logits_row) {
  const double m = logits_row.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(logits_row.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits_row.size(); ++i) {
    p[static_cast<std::size_t>(i)] = std::exp(logits_row(i) - m);
    total += p[static_cast<std::size_t>(i)];
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace mmkd::text
