#include "mmkd/experiment/search.hpp"

#include "mmkd/error.hpp"
#include "mmkd/experiment/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace mmkd::experiment {

namespace fs = std::filesystem;

namespace {

// Stratified 90:10 split of the first fold's train + val posts.
corpus::Fold search_fold(const corpus::Dataset& ds, const corpus::Fold& first, std::uint64_t seed) {
  std::vector<std::string> pool = first.train;
  pool.insert(pool.end(), first.val.begin(), first.val.end());
  std::sort(pool.begin(), pool.end());
  std::map<std::size_t, std::vector<std::string>> by_class;
  for (const auto& id : pool) by_class[ds.post(id).label].push_back(id);
  std::mt19937_64 rng(seed);
  corpus::Fold f;
  for (auto& [label, ids] : by_class) {
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(1, (ids.size() + 5) / 10);
    f.val.insert(f.val.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n_val, ids.size())));
    f.train.insert(f.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n_val, ids.size())), ids.end());
  }
  return f;
}

}  // namespace

nlohmann::json UniformSampler::sample(const SearchSpace& space, std::mt19937_64& rng) {
  nlohmann::json a = nlohmann::json::object();
  for (const auto& p : space.params) {
    std::uniform_int_distribution<std::size_t> pick(0, p.choices.size() - 1);
    a[p.name] = p.choices[pick(rng)];
  }
  return a;
}

nlohmann::json trial_json(const Trial& t) {
  nlohmann::json j = {{"index", t.index}, {"assignment", t.assignment}, {"metrics", t.metrics}};
  j["objective"] = std::isfinite(t.objective) ? nlohmann::json(t.objective) : nlohmann::json(nullptr);
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

SearchResult hyperparameter_search(const SearchSpace& space, const TrialObjective& objective,
                                   std::size_t budget, std::uint64_t seed, Sampler* sampler,
                                   const fs::path& journal) {
  if (space.params.empty()) throw Error(ErrorKind::kInvalidConfig, "search space is empty");
  if (budget < 1) throw Error(ErrorKind::kInvalidConfig, "search budget must be at least 1");
  UniformSampler uniform;
  if (sampler == nullptr) sampler = &uniform;
  std::mt19937_64 rng(seed);
  std::ofstream log;
  if (!journal.empty()) {
    if (journal.has_parent_path()) fs::create_directories(journal.parent_path());
    log.open(journal, std::ios::trunc);
    if (!log) throw Error(ErrorKind::kIoError, "cannot write " + journal.string());
  }
  SearchResult result;
  for (std::size_t i = 0; i < budget; ++i) {
    Trial t;
    t.index = i;
    t.assignment = sampler->sample(space, rng);
    if (!space.contains(t.assignment)) {
      throw Error(ErrorKind::kRangeError, "sampler left the search space: " + t.assignment.dump());
    }
    try {
      auto [score, metrics] = objective(t.assignment);
      t.objective = score;
      t.metrics = std::move(metrics);
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    if (log.is_open()) log << trial_json(t).dump() << '\n' << std::flush;
    if (result.trials.empty() || t.objective > result.best.objective) result.best = t;
    result.trials.push_back(std::move(t));
  }
  return result;
}

SearchResult search_student(const ExperimentConfig& base, std::size_t budget) {
  ExperimentRunner runner(base);
  const auto& ds = runner.dataset();
  const auto fold = in_stage("search", [&] {
    return search_fold(ds, runner.plan().folds.front(), *runner.config().seed);
  });
  const fs::path out = runner.dir() / "search";
  const auto objective = [&](const nlohmann::json& assignment) {
    ExperimentConfig trial = runner.config();
    apply_student_assignment(trial, assignment);
    trial.output_dir = (out / "trial").string();
    ExperimentRunner trial_runner(trial);
    const auto report = trial_runner.validate_fold(fold);
    return std::pair{report.weighted_f1, nlohmann::json(report)};
  };
  auto result = hyperparameter_search(student_space(), objective, budget, *runner.config().seed,
                                      nullptr, out / "trials.jsonl");
  in_stage("search", [&] {
    fs::create_directories(out);
    std::ofstream(out / "best.json") << trial_json(result.best).dump(2) << '\n';
    ExperimentConfig best = runner.config();
    apply_student_assignment(best, result.best.assignment);
    best.output_dir = (out / "replay").string();
    std::ofstream(out / "best_config.json") << config_to_json(best).dump(2) << '\n';
  });
  return result;
}

nlohmann::json replay_trial(const ExperimentConfig& snapshot) {
  ExperimentRunner runner(snapshot);
  const auto& ds = runner.dataset();
  const auto fold = search_fold(ds, runner.plan().folds.front(), *runner.config().seed);
  return runner.validate_fold(fold);
}

}  // namespace mmkd::experiment
