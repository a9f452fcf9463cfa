#include "mmkd/corpus/fixtures.hpp"

#include "mmkd/error.hpp"

#include <array>
#include <fstream>
#include <random>
#include <string_view>

namespace mmkd::corpus {

namespace {

constexpr std::array<std::string_view, 10> kDistress = {
    "sad", "cry", "alone", "hopeless", "tired", "hurt", "scared", "angry", "empty", "lost"};
constexpr std::array<std::string_view, 10> kNeutral = {
    "happy", "sunny", "picnic", "fun", "great", "love", "smile", "friends", "music", "coffee"};
constexpr std::array<std::string_view, 8> kFiller = {
    "i", "feel", "so", "today", "again", "really", "just", "and"};
constexpr std::array<std::string_view, 6> kExtras = {
    ":(", ":)", "@sam", "http://t.co/x1", "\xF0\x9F\x98\xA2", "..."};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return words[d(rng)];
}

std::string toy_post(bool distress, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_words(4, 6);
  std::bernoulli_distribution extra(0.3);
  std::bernoulli_distribution filler(0.4);
  std::string text;
  const int n = n_words(rng);
  for (int i = 0; i < n; ++i) {
    if (!text.empty()) text += ' ';
    if (i > 0 && filler(rng)) {
      text += pick(kFiller, rng);
    } else {
      text += distress ? pick(kDistress, rng) : pick(kNeutral, rng);
    }
  }
  if (extra(rng)) {
    text += ' ';
    text += pick(kExtras, rng);
  }
  text += distress ? "." : "!";
  return text;
}

}  // namespace

Dataset toy_dataset(std::size_t n_posts, std::uint64_t seed, Protocol protocol) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, std::string>> records;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < n_posts; ++i) {
    const bool distress = i % 2 == 0;
    records.emplace_back("p" + std::to_string(i), toy_post(distress, rng));
    labels.push_back(distress ? 0 : 1);
  }
  return make_dataset("toy", {"distress", "neutral"}, records, labels, std::move(protocol));
}

Dataset twitsuicide_shaped(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::array<std::size_t, 3> counts = {103, 264, 293};
  std::uniform_int_distribution<int> n_words(3, 31);
  std::vector<std::pair<std::string, std::string>> records;
  std::vector<std::size_t> labels;
  std::size_t next = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      std::string text;
      const int n = n_words(rng);
      for (int w = 0; w < n; ++w) {
        if (!text.empty()) text += ' ';
        text += c == 0 ? pick(kNeutral, rng) : (w % 3 == 0 ? pick(kFiller, rng) : pick(kDistress, rng));
      }
      records.emplace_back("ts" + std::to_string(next++), std::move(text));
      labels.push_back(c);
    }
  }
  return make_dataset("TwitSuicide-shaped",
                      {"Safe to Ignore", "Possibly Concerning", "Strongly Concerning"}, records,
                      labels, KFold{10});
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  for (const auto& p : dataset.posts) {
    out << nlohmann::json{{"id", p.id}, {"text", p.text}, {"label", dataset.classes[p.label]}}.dump()
        << '\n';
  }
  auto manifest_path = path;
  manifest_path += ".manifest.json";
  std::ofstream mf(manifest_path);
  nlohmann::json protocol;
  if (const auto* ex = std::get_if<ExplicitSplit>(&dataset.protocol)) {
    protocol = {{"train", ex->train}, {"val", ex->val}, {"test", ex->test}};
  } else {
    protocol = describe_protocol(dataset.protocol);
  }
  mf << nlohmann::json{{"name", dataset.name}, {"classes", dataset.classes}, {"protocol", protocol}}
            .dump(2)
     << '\n';
}

}  // namespace mmkd::corpus
