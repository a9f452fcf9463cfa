#include "mmkd/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mmkd::nn {

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng)
    : weight_(Var::parameter(xavier_uniform(in, out, rng))),
      bias_(Var::parameter(Matrix::Zero(1, out))) {}

Var Linear::forward(const Var& x) const { return add_row(matmul(x, weight_), bias_); }

void Linear::collect(ParameterList& out) const {
  out.push_back(weight_);
  out.push_back(bias_);
}

LayerNorm::LayerNorm(Eigen::Index width)
    : gain_(Var::parameter(Matrix::Ones(1, width))),
      bias_(Var::parameter(Matrix::Zero(1, width))) {}

Var LayerNorm::forward(const Var& x) const { return layer_norm_rows(x, gain_, bias_); }

void LayerNorm::collect(ParameterList& out) const {
  out.push_back(gain_);
  out.push_back(bias_);
}

MultiHeadSelfAttention::MultiHeadSelfAttention(Eigen::Index width, int heads,
                                               double dropout, std::mt19937_64& rng)
    : heads_(heads),
      dropout_(dropout),
      query_(width, width, rng),
      key_(width, width, rng),
      value_(width, width, rng),
      output_(width, width, rng) {
  if (heads <= 0 || width % heads != 0) {
    throw std::invalid_argument("attention width must be divisible by heads");
  }
}

Var MultiHeadSelfAttention::forward(const Var& x, const ForwardMode& mode) const {
  const Var q = query_.forward(x);
  const Var k = key_.forward(x);
  const Var v = value_.forward(x);
  const Eigen::Index head_width = x.cols() / heads_;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_width));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    const Eigen::Index at = h * head_width;
    const Var qh = slice_cols(q, at, head_width);
    const Var kh = slice_cols(k, at, head_width);
    const Var vh = slice_cols(v, at, head_width);
    Var weights = softmax_rows(scale(matmul(qh, transpose(kh)), scale_factor));
    weights = dropout(weights, dropout_, mode);
    outputs.push_back(matmul(weights, vh));
  }
  return output_.forward(heads_ == 1 ? outputs[0] : concat_cols(outputs));
}

void MultiHeadSelfAttention::collect(ParameterList& out) const {
  query_.collect(out);
  key_.collect(out);
  value_.collect(out);
  output_.collect(out);
}

TransformerEncoderLayer::TransformerEncoderLayer(const TransformerConfig& cfg,
                                                 std::mt19937_64& rng)
    : dropout_(cfg.dropout),
      activation_(cfg.activation),
      attention_(cfg.width, cfg.heads, cfg.dropout, rng),
      norm1_(cfg.width),
      norm2_(cfg.width),
      ffn_in_(cfg.width, cfg.ffn_width > 0 ? cfg.ffn_width : 2 * cfg.width, rng),
      ffn_out_(cfg.ffn_width > 0 ? cfg.ffn_width : 2 * cfg.width, cfg.width, rng) {}

Var TransformerEncoderLayer::forward(const Var& x, const ForwardMode& mode) const {
  Var h = norm1_.forward(add(x, dropout(attention_.forward(x, mode), dropout_, mode)));
  Var f = ffn_out_.forward(dropout(activate(ffn_in_.forward(h), activation_), dropout_, mode));
  return norm2_.forward(add(h, dropout(f, dropout_, mode)));
}

void TransformerEncoderLayer::collect(ParameterList& out) const {
  attention_.collect(out);
  norm1_.collect(out);
  norm2_.collect(out);
  ffn_in_.collect(out);
  ffn_out_.collect(out);
}

TransformerEncoder::TransformerEncoder(const TransformerConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  layers_.reserve(static_cast<std::size_t>(cfg.layers));
  for (int i = 0; i < cfg.layers; ++i) layers_.emplace_back(cfg, rng);
}

Var TransformerEncoder::forward(const Var& x, const ForwardMode& mode) const {
  Var h = x;
  for (const auto& layer : layers_) h = layer.forward(h, mode);
  return h;
}

void TransformerEncoder::collect(ParameterList& out) const {
  for (const auto& layer : layers_) layer.collect(out);
}

Mlp::Mlp(Eigen::Index in, int hidden_layers, Eigen::Index hidden_dim, Eigen::Index out,
         double dropout, std::mt19937_64& rng)
    : dropout_(dropout) {
  Eigen::Index width = in;
  for (int i = 0; i < hidden_layers; ++i) {
    hidden_.emplace_back(width, hidden_dim, rng);
    width = hidden_dim;
  }
  output_ = Linear(width, out, rng);
}

Var Mlp::forward(const Var& x, const ForwardMode& mode) const {
  Var h = x;
  for (const auto& layer : hidden_) h = dropout(relu(layer.forward(h)), dropout_, mode);
  return output_.forward(h);
}

void Mlp::collect(ParameterList& out) const {
  for (const auto& layer : hidden_) layer.collect(out);
  output_.collect(out);
}

}  // namespace mmkd::nn
