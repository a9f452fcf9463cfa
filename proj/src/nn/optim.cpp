#include "mmkd/nn/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mmkd::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

Adam::Adam(ParameterList params, double lr, double weight_decay, double beta1,
           double beta2, double eps)
    : params_(std::move(params)),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p.grad().size() == 0) continue;
    const Matrix& g = p.grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix& w = p.mutable_value();
    if (weight_decay_ > 0.0) w *= (1.0 - lr_ * weight_decay_);
    w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

bool ReduceLrOnPlateau::observe(double loss, Adam& optimizer) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    const double next = std::max(optimizer.lr() * factor_, min_lr_);
    if (next < optimizer.lr()) {
      optimizer.set_lr(next);
      return true;
    }
  }
  return false;
}

bool EarlyStopping::observe(double score) {
  if (score > best_) {
    best_ = score;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

std::vector<double> flatten(const ParameterList& params) {
  std::vector<double> flat;
  for (const auto& p : params) {
    flat.insert(flat.end(), p.value().data(), p.value().data() + p.value().size());
  }
  return flat;
}

void restore(const ParameterList& params, const std::vector<double>& flat) {
  std::size_t at = 0;
  for (auto p : params) {
    Matrix& w = p.mutable_value();
    const auto n = static_cast<std::size_t>(w.size());
    if (at + n > flat.size()) throw std::runtime_error("parameter blob too short");
    std::memcpy(w.data(), flat.data() + at, n * sizeof(double));
    at += n;
  }
  if (at != flat.size()) throw std::runtime_error("parameter blob size mismatch");
}

std::string fnv1a_hex(const void* data, std::size_t size) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string checksum(const ParameterList& params) {
  const auto flat = flatten(params);
  return fnv1a_hex(flat.data(), flat.size() * sizeof(double));
}

void write_blob(std::ostream& out, const std::vector<double>& flat) {
  const std::uint64_t n = flat.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

std::vector<double> read_blob(std::istream& in) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in) throw std::runtime_error("truncated parameter blob");
  std::vector<double> flat(n);
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated parameter blob");
  return flat;
}

}  // namespace mmkd::nn
