#pragma once

#include "mmkd/nn/autograd.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace mmkd::nn {

using ParameterList = std::vector<Var>;

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);
Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng);

  Var forward(const Var& x) const;
  void collect(ParameterList& out) const;

  Eigen::Index in_features() const { return weight_.rows(); }
  Eigen::Index out_features() const { return weight_.cols(); }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  Var weight_;  // in x out
  Var bias_;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(Eigen::Index width);

  Var forward(const Var& x) const;
  void collect(ParameterList& out) const;

 private:
  Var gain_;
  Var bias_;
};

struct TransformerConfig {
  Eigen::Index width = 24;
  int layers = 2;
  int heads = 2;
  Eigen::Index ffn_width = 0;  // 0 -> 2 * width
  double dropout = 0.1;
  Activation activation = Activation::kGelu;
};

class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(Eigen::Index width, int heads, double dropout,
                         std::mt19937_64& rng);

  Var forward(const Var& x, const ForwardMode& mode) const;
  void collect(ParameterList& out) const;

 private:
  int heads_ = 1;
  double dropout_ = 0.0;
  Linear query_, key_, value_, output_;
};

// Post-norm encoder block: x = LN(x + MHA(x)); x = LN(x + FFN(x)).
class TransformerEncoderLayer {
 public:
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(const TransformerConfig& cfg, std::mt19937_64& rng);

  Var forward(const Var& x, const ForwardMode& mode) const;
  void collect(ParameterList& out) const;

 private:
  double dropout_ = 0.0;
  Activation activation_ = Activation::kGelu;
  MultiHeadSelfAttention attention_;
  LayerNorm norm1_, norm2_;
  Linear ffn_in_, ffn_out_;
};

class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(const TransformerConfig& cfg, std::mt19937_64& rng);

  Var forward(const Var& x, const ForwardMode& mode) const;
  void collect(ParameterList& out) const;
  const TransformerConfig& config() const { return cfg_; }

 private:
  TransformerConfig cfg_;
  std::vector<TransformerEncoderLayer> layers_;
};

// Stack of `hidden_layers` Linear+ReLU+dropout blocks followed by an output
// Linear producing logits.
class Mlp {
 public:
  Mlp() = default;
  Mlp(Eigen::Index in, int hidden_layers, Eigen::Index hidden_dim, Eigen::Index out,
      double dropout, std::mt19937_64& rng);

  Var forward(const Var& x, const ForwardMode& mode) const;
  void collect(ParameterList& out) const;

 private:
  double dropout_ = 0.0;
  std::vector<Linear> hidden_;
  Linear output_;
};

}  // namespace mmkd::nn
