#include "mmkd/nn/trainer.hpp"

#include "mmkd/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mmkd::nn {

std::vector<EpochLog> run_training(const ParameterList& params, const TrainLoopConfig& cfg,
                                   std::size_t n_train, const BatchLoss& batch_loss,
                                   const Validate& validate) {
  Adam optimizer(params, cfg.lr, cfg.weight_decay);
  std::optional<ReduceLrOnPlateau> plateau;
  if (cfg.plateau) plateau.emplace(cfg.plateau->patience, cfg.plateau->factor);
  EarlyStopping stopper(cfg.early_stop_patience);
  std::vector<double> best_params;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);

  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    ForwardMode mode{true, &rng};
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t end = std::min(n_train, start + batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      optimizer.zero_grad();
      Var loss = batch_loss(idx, mode);
      if (!std::isfinite(loss.scalar())) {
        throw Error(ErrorKind::kNonFiniteLoss,
                    "loss diverged at epoch " + std::to_string(epoch));
      }
      loss.backward();
      optimizer.step();
      total += loss.scalar();
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches > 0 ? total / static_cast<double>(batches) : 0.0;
    log.lr = optimizer.lr();
    if (validate) {
      const Validation v = validate();
      log.val_score = v.score;
      log.val_loss = v.loss;
      if (stopper.observe(v.score) && cfg.early_stop_patience > 0) best_params = flatten(params);
      if (plateau) plateau->observe(v.loss, optimizer);
    }
    logs.push_back(log);
    if (validate && stopper.should_stop()) break;
  }
  if (!best_params.empty()) restore(params, best_params);
  return logs;
}

}  // namespace mmkd::nn
