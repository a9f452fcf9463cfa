#pragma once

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/eval/metrics.hpp"

#include <functional>
#include <map>

namespace mmkd::eval {

// Trains a fresh pipeline on `fold` and returns one predicted class per
// entry of fold.test, in order.
using FoldPipeline = std::function<std::vector<std::size_t>(
    const corpus::Dataset& dataset, const corpus::Fold& fold, std::size_t fold_index)>;

struct FoldMean {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

struct CrossValidation {
  MetricsReport pooled;                       // primary: one report over all folds' predictions
  std::vector<MetricsReport> folds;
  FoldMean fold_mean;                         // secondary: mean of per-fold scores
  std::map<std::string, std::size_t> predictions;  // post id -> predicted class
};

// InvalidConfig when a post is tested twice or, with `require_cover`, when
// a multi-fold plan leaves posts untested. Pipeline failures are rethrown
// as StageError("fold <i>").
CrossValidation cross_validate(const FoldPipeline& pipeline, const corpus::Dataset& dataset,
                               const corpus::SplitPlan& plan, bool require_cover = true);

void to_json(nlohmann::json& j, const CrossValidation& cv);

}  // namespace mmkd::eval
