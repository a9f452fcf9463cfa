#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mmkd::corpus {

struct Post {
  std::string id;
  std::string text;  // de-identified
  std::size_t label = 0;
  std::size_t char_length = 0;  // Unicode code points
  std::size_t word_count = 0;   // whitespace-delimited tokens
};

struct KFold {
  int k = 10;
};

// Fractions of the whole dataset; `val == 0` means "carve 10% of train".
struct FixedSplit {
  double train = 0.8;
  double val = 0.0;
  double test = 0.2;
};

struct ExplicitSplit {
  std::vector<std::string> train, val, test;
};

using Protocol = std::variant<KFold, FixedSplit, ExplicitSplit>;

// Accepts "kfold:<k>", "split:<train>/<test>" and "split:<train>/<val>/<test>".
Protocol parse_protocol(std::string_view spec);
std::string describe_protocol(const Protocol& protocol);

struct Dataset {
  std::string name;
  std::vector<std::string> classes;
  std::vector<Post> posts;
  Protocol protocol = KFold{};

  // Rebuilds the id lookup; call after mutating `posts`.
  void reindex();
  std::size_t index_of(std::string_view post_id) const;
  const Post& post(std::string_view post_id) const { return posts[index_of(post_id)]; }
  std::vector<std::size_t> indices_of(const std::vector<std::string>& ids) const;

 private:
  std::unordered_map<std::string, std::size_t> id_index_;
};

struct Fold {
  std::vector<std::string> train, val, test;
};

struct SplitPlan {
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
};

struct LengthSummary {
  std::size_t min = 0;
  std::size_t max = 0;
  double avg = 0.0;
};

struct ClassStats {
  std::string name;
  std::size_t count = 0;
  double percentage = 0.0;
  LengthSummary length;
  LengthSummary words;
};

struct DatasetStats {
  std::string name;
  std::size_t total = 0;
  std::vector<ClassStats> classes;
  LengthSummary length;
  LengthSummary words;
};

struct LoadOptions {
  // Overrides the sidecar manifest when set.
  std::optional<Protocol> protocol;
  std::optional<std::vector<std::string>> classes;
};

// Reads line-delimited JSON records {"id","text","label"}. A sidecar
// "<path>.manifest.json" may declare "classes" and "protocol". Text is
// de-identified on load.
Dataset load_dataset(const std::filesystem::path& path, const std::string& name,
                     const LoadOptions& options = {});

// Builds a dataset from in-memory records (used by fixtures and tests).
Dataset make_dataset(std::string name, std::vector<std::string> classes,
                     const std::vector<std::pair<std::string, std::string>>& id_text,
                     const std::vector<std::size_t>& labels, Protocol protocol);

std::string deidentify(std::string_view text);
std::size_t code_point_count(std::string_view text);
std::size_t whitespace_token_count(std::string_view text);

SplitPlan make_splits(const Dataset& dataset, std::uint64_t seed);
DatasetStats compute_stats(const Dataset& dataset);

void to_json(nlohmann::json& j, const Fold& fold);
void from_json(const nlohmann::json& j, Fold& fold);
void to_json(nlohmann::json& j, const SplitPlan& plan);
void from_json(const nlohmann::json& j, SplitPlan& plan);
void to_json(nlohmann::json& j, const DatasetStats& stats);

}  // namespace mmkd::corpus
