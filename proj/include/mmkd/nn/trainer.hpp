#pragma once

#include "mmkd/nn/optim.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace mmkd::nn {

struct PlateauConfig {
  int patience = 4;
  double factor = 0.5;
};

struct TrainLoopConfig {
  int epochs = 5;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int early_stop_patience = 0;  // 0 disables early stopping
  std::optional<PlateauConfig> plateau;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_score = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct Validation {
  double score = 0.0;  // maximized (early stopping)
  double loss = 0.0;   // minimized (plateau schedule)
};

// Mean loss over the given training-sample positions.
using BatchLoss = std::function<Var(std::span<const std::size_t> batch, const ForwardMode& mode)>;
using Validate = std::function<Validation()>;

// Shuffled mini-batch Adam loop. With early stopping the best-scoring
// parameters are restored on exit. Throws NonFiniteLoss on divergence.
std::vector<EpochLog> run_training(const ParameterList& params, const TrainLoopConfig& cfg,
                                   std::size_t n_train, const BatchLoss& batch_loss,
                                   const Validate& validate);

}  // namespace mmkd::nn
