#pragma once

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/eval/metrics.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mmkd {

enum class Modality { kText, kEmotion, kAudio };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);

// A frozen classifier that scores a post over the dataset classes. Every
// teacher owns whatever per-post features it needs (embedding tables,
// spectrograms), so the only input is the post itself.
class Teacher {
 public:
  virtual ~Teacher() = default;

  virtual Modality modality() const = 0;
  virtual std::size_t num_classes() const = 0;
  // Non-negative, sums to 1.
  virtual std::vector<double> predict_proba(const corpus::Post& post) const = 0;
  // Digest of the trained parameters.
  virtual std::string checksum() const = 0;
};

// Renormalizes non-negative scores to a distribution; a zero vector maps to
// the uniform distribution.
std::vector<double> renormalize(std::vector<double> scores);

// Argmax predictions of `teacher` over the given posts, scored against
// their gold labels.
eval::MetricsReport evaluate_teacher(const Teacher& teacher, const corpus::Dataset& dataset,
                                     const std::vector<std::string>& ids);

}  // namespace mmkd
