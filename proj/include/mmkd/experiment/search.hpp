#pragma once

#include "mmkd/eval/metrics.hpp"
#include "mmkd/experiment/config.hpp"
#include "mmkd/experiment/search_space.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <random>

namespace mmkd::experiment {

class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual nlohmann::json sample(const SearchSpace& space, std::mt19937_64& rng) = 0;
};

// Independent uniform draw per parameter.
class UniformSampler final : public Sampler {
 public:
  nlohmann::json sample(const SearchSpace& space, std::mt19937_64& rng) override;
};

struct Trial {
  std::size_t index = 0;
  nlohmann::json assignment;
  double objective = -std::numeric_limits<double>::infinity();
  nlohmann::json metrics;  // objective's report, null for failed trials
  std::string error;
};

struct SearchResult {
  Trial best;
  std::vector<Trial> trials;
};

// Evaluates one assignment; throws on failure.
using TrialObjective = std::function<std::pair<double, nlohmann::json>(const nlohmann::json& assignment)>;

// Seeded sampling over `space`. Failed trials score -inf and the search
// continues. Ties keep the earliest trial. When `journal` is set every
// finished trial is appended to it as one JSON line.
SearchResult hyperparameter_search(const SearchSpace& space, const TrialObjective& objective,
                                   std::size_t budget = 50, std::uint64_t seed = 0,
                                   Sampler* sampler = nullptr,
                                   const std::filesystem::path& journal = {});

nlohmann::json trial_json(const Trial& t);

// Student-block search for an experiment. Each trial trains on a
// stratified 90% of the first fold's non-test posts and scores weighted F1
// on the other 10%; teachers are trained once and shared through the
// store. Writes <output_dir>/search/{trials.jsonl,best.json,best_config.json}.
SearchResult search_student(const ExperimentConfig& base, std::size_t budget = 50);

// Re-runs one trial from a resolved config snapshot; returns the metrics
// JSON exactly as logged for the trial.
nlohmann::json replay_trial(const ExperimentConfig& snapshot);

}  // namespace mmkd::experiment
