#pragma once

#include "mmkd/corpus/corpus.hpp"

#include <array>
#include <bitset>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mmkd::emotion {

inline constexpr std::size_t kNumEmotions = 7;
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionTypes = {
    "anger", "disgust", "fear", "sadness", "surprise", "negative", "other"};

// Multi-hot vector over kEmotionTypes, bit i = kEmotionTypes[i].
using EmotionLabelSet = std::bitset<kNumEmotions>;

std::size_t emotion_index(std::string_view name);

class EmotionLexicon {
 public:
  // Terms are lower-cased; adding a term twice merges the emotion sets.
  void add(std::string_view term, const EmotionLabelSet& emotions);
  const EmotionLabelSet* find(std::string_view term) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, EmotionLabelSet>& entries() const { return entries_; }

  // "term<TAB>emotion1,emotion2" per line; blank lines and '#' comments
  // are skipped.
  static EmotionLexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, EmotionLabelSet> entries_;
};

// Union of the emotion sets of every post token found in the lexicon.
EmotionLabelSet assign_emotions(std::string_view text, const EmotionLexicon& lexicon);
EmotionLabelSet assign_emotions(const corpus::Post& post, const EmotionLexicon& lexicon);
std::vector<EmotionLabelSet> assign_emotions(const corpus::Dataset& dataset,
                                             const EmotionLexicon& lexicon);

// counts[m] = number of posts carrying exactly m emotion labels, m = 0..7.
std::array<std::size_t, kNumEmotions + 1> emotion_label_distribution(
    const std::vector<EmotionLabelSet>& labels);

// Small surface-form lexicon over the fixture vocabulary.
EmotionLexicon toy_lexicon();

}  // namespace mmkd::emotion
