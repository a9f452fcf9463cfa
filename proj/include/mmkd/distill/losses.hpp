#pragma once

#include "mmkd/nn/autograd.hpp"
#include "mmkd/teacher.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mmkd::distill {

inline constexpr double kProbFloor = 1e-12;

struct TeacherOutput {
  Modality modality = Modality::kText;
  std::vector<double> probs;
};

// Component-wise mean. The sum runs in a canonical order so permuting the
// teachers leaves the result bit-identical. ClassMismatch on unequal
// lengths, InvalidConfig on an empty set.
std::vector<double> teacher_soft_targets(std::span<const std::vector<double>> outputs);
std::vector<double> teacher_soft_targets(std::span<const TeacherOutput> outputs);

// p^(1/T), renormalized: the distribution whose logits are ln p / T.
std::vector<double> soften(std::span<const double> probs, double temperature);

// KL(soft || student) in nats. Both sides are softened first when the
// temperature differs from 1; student probabilities are floored at 1e-12
// and zero-mass target entries contribute nothing.
double kd_loss(std::span<const double> student_probs, std::span<const double> soft_targets,
               double temperature = 1.0);

// -ln max(p[gold], 1e-12).
double task_loss(std::span<const double> student_probs, std::size_t gold);
double task_loss(std::span<const std::vector<double>> student_probs,
                 std::span<const std::size_t> gold);

// Differentiable forms over a 1 x C logits row.
nn::Var kd_loss(const nn::Var& logits, std::span<const double> soft_targets,
                double temperature = 1.0);
nn::Var task_loss(const nn::Var& logits, std::size_t gold);

}  // namespace mmkd::distill
