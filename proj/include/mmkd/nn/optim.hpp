#pragma once

#include "mmkd/nn/layers.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace mmkd::nn {

// Adam with decoupled weight decay.
class Adam {
 public:
  Adam(ParameterList params, double lr, double weight_decay = 0.0,
       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  const ParameterList& params() const { return params_; }

 private:
  ParameterList params_;
  std::vector<Matrix> m_, v_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Multiplies the learning rate by `factor` once the monitored loss has not
// improved for more than `patience` consecutive epochs.
class ReduceLrOnPlateau {
 public:
  ReduceLrOnPlateau(int patience, double factor, double min_lr = 0.0)
      : patience_(patience), factor_(factor), min_lr_(min_lr) {}

  // Returns true when the learning rate was reduced.
  bool observe(double loss, Adam& optimizer);

 private:
  int patience_;
  double factor_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

// Tracks the best (maximized) validation score and signals a stop after
// `patience` epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when this epoch is a new best.
  bool observe(double score);
  bool should_stop() const { return patience_ > 0 && since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int since_best_ = 0;
};

// Parameter snapshots: a flat little-endian float64 blob in collection order.
std::vector<double> flatten(const ParameterList& params);
void restore(const ParameterList& params, const std::vector<double>& flat);
std::string checksum(const ParameterList& params);
std::string fnv1a_hex(const void* data, std::size_t size);

void write_blob(std::ostream& out, const std::vector<double>& flat);
std::vector<double> read_blob(std::istream& in);

}  // namespace mmkd::nn
