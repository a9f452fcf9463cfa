#pragma once

#include "mmkd/nn/layers.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mmkd::text {

// Identifies a text-encoder backend. Pretrained-model ids resolve to
// hashed stand-ins of the same width; no external weights are loaded.
struct EncoderSpec {
  std::string name = "toy-deterministic";
  Eigen::Index width = 24;
  std::size_t max_length = 256;
  std::uint64_t seed = 0x5eed;
};

// Known ids: "toy-deterministic", "bert-base-uncased", "roberta-base",
// "mental-bert", "clinical-bert". Unknown ids raise BackendFailure.
EncoderSpec resolve_backend(std::string_view id);
std::vector<std::string> known_backends();

void to_json(nlohmann::json& j, const EncoderSpec& s);
void from_json(const nlohmann::json& j, EncoderSpec& s);

struct Encoded {
  nn::Var summary;  // 1 x d
  nn::Var tokens;   // n x d, n >= 1
};

// Deterministic token encoder. Each token's base embedding is a Gaussian
// vector seeded by (backend seed, token hash). Tokens registered at
// construction get a trainable row; others use their fixed base vector.
// Contextual states mix each embedding with its neighbours and a
// sinusoidal position signal; the summary is their mean.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(EncoderSpec spec, const std::vector<std::string>& vocabulary);

  Encoded encode(std::string_view text) const;
  Encoded encode_tokens(std::vector<std::string> tokens) const;
  std::vector<std::string> tokens_of(std::string_view text) const;

  nn::RowVector base_embedding(std::string_view token) const;
  // Overwrites the trainable row of a registered token.
  void set_token_row(std::string_view token, const nn::RowVector& row);
  bool has_token(std::string_view token) const;

  const EncoderSpec& spec() const { return spec_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  void collect(nn::ParameterList& out) const;

 private:
  EncoderSpec spec_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  nn::Var table_;
};

// Sorted unique tokens of the given texts.
std::vector<std::string> build_vocabulary(const std::vector<std::string>& texts);

std::uint64_t stable_hash(std::string_view s);

}  // namespace mmkd::text
