#pragma once

// Central finite-difference oracle for autograd tests. Independent of the
// backward implementations: it only evaluates forward passes.

#include "mmkd/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mmkd::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients of `loss()` w.r.t. each parameter with
// central differences. Relative error uses max(|a|, |n|, floor) as scale so
// near-zero gradients are judged absolutely against `floor`.
inline GradCheckResult gradcheck(const std::function<nn::Var()>& loss,
                                 std::vector<nn::Var> params, double step = 1e-5,
                                 double floor = 1e-6) {
  for (auto& p : params) p.zero_grad();
  loss().backward();
  std::vector<nn::Matrix> analytic;
  for (const auto& p : params) {
    analytic.push_back(p.grad().size() ? p.grad() : nn::Matrix::Zero(p.rows(), p.cols()));
  }
  GradCheckResult r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Matrix& w = params[k].mutable_value();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + step;
      const double up = loss().scalar();
      w.data()[i] = saved - step;
      const double down = loss().scalar();
      w.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k].data()[i];
      const double abs_err = std::abs(a - numeric);
      const double scale = std::max({std::abs(a), std::abs(numeric), floor});
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      r.max_rel_error = std::max(r.max_rel_error, abs_err / scale);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace mmkd::testing
