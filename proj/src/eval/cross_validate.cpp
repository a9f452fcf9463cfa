#include "mmkd/eval/cross_validate.hpp"

#include "mmkd/error.hpp"

namespace mmkd::eval {

CrossValidation cross_validate(const FoldPipeline& pipeline, const corpus::Dataset& dataset,
                               const corpus::SplitPlan& plan, bool require_cover) {
  if (plan.folds.empty()) throw Error(ErrorKind::kInvalidConfig, "split plan has no folds");
  std::map<std::string, std::size_t> seen;
  for (const auto& fold : plan.folds) {
    for (const auto& id : fold.test) {
      dataset.index_of(id);
      if (!seen.emplace(id, 0).second) {
        throw Error(ErrorKind::kInvalidConfig, "post " + id + " is tested in more than one fold");
      }
    }
  }
  // Fixed splits test only part of the data; k-fold plans must cover it.
  if (require_cover && plan.folds.size() > 1 && seen.size() != dataset.posts.size()) {
    throw Error(ErrorKind::kInvalidConfig, "fold test portions do not cover the dataset");
  }

  CrossValidation cv;
  std::vector<std::size_t> truth, pred;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const auto& fold = plan.folds[k];
    std::vector<std::size_t> fold_pred;
    try {
      fold_pred = pipeline(dataset, fold, k);
      if (fold_pred.size() != fold.test.size()) {
        throw Error(ErrorKind::kLengthMismatch, "pipeline returned " +
                                                    std::to_string(fold_pred.size()) +
                                                    " predictions for " +
                                                    std::to_string(fold.test.size()) + " posts");
      }
    } catch (const Error& e) {
      throw StageError("fold " + std::to_string(k), e);
    }
    std::vector<std::size_t> fold_truth;
    for (std::size_t i = 0; i < fold.test.size(); ++i) {
      fold_truth.push_back(dataset.post(fold.test[i]).label);
      cv.predictions[fold.test[i]] = fold_pred[i];
    }
    truth.insert(truth.end(), fold_truth.begin(), fold_truth.end());
    pred.insert(pred.end(), fold_pred.begin(), fold_pred.end());
    cv.folds.push_back(confusion_metrics(fold_truth, fold_pred, dataset.classes));
  }
  cv.pooled = confusion_metrics(truth, pred, dataset.classes);
  for (const auto& r : cv.folds) {
    cv.fold_mean.accuracy += r.accuracy;
    cv.fold_mean.macro_f1 += r.macro_f1;
    cv.fold_mean.weighted_f1 += r.weighted_f1;
  }
  const double n = static_cast<double>(cv.folds.size());
  cv.fold_mean.accuracy /= n;
  cv.fold_mean.macro_f1 /= n;
  cv.fold_mean.weighted_f1 /= n;
  return cv;
}

void to_json(nlohmann::json& j, const CrossValidation& cv) {
  j = {{"pooled", cv.pooled},
       {"folds", cv.folds},
       {"fold_mean",
        {{"accuracy", cv.fold_mean.accuracy},
         {"macro_f1", cv.fold_mean.macro_f1},
         {"weighted_f1", cv.fold_mean.weighted_f1}}},
       {"predictions", cv.predictions}};
}

}  // namespace mmkd::eval
