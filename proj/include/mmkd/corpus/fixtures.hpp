#pragma once

#include "mmkd/corpus/corpus.hpp"

#include <cstdint>
#include <filesystem>

namespace mmkd::corpus {

// Two-class synthetic corpus ("distress" vs "neutral") whose classes are
// separable by vocabulary. Posts carry handles, URLs and emoticons so the
// masking and tokenizer paths are exercised.
Dataset toy_dataset(std::size_t n_posts = 40, std::uint64_t seed = 7,
                    Protocol protocol = KFold{10});

// Synthetic corpus with the class layout of the 3-class suicide-risk
// Twitter set: 660 posts, 103/264/293 per class, 3..31 words per post.
Dataset twitsuicide_shaped(std::uint64_t seed = 11);

// Writes `<path>` as JSONL plus `<path>.manifest.json`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace mmkd::corpus
