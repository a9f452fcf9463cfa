#include "mmkd/corpus/corpus.hpp"

#include "mmkd/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace mmkd::corpus {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool looks_like_url(std::string_view token) {
  if (token.size() > 4 && token.substr(0, 4) == "www.") return true;
  const auto sep = token.find("://");
  if (sep == std::string_view::npos || sep == 0) return false;
  if (!std::isalpha(static_cast<unsigned char>(token[0]))) return false;
  for (std::size_t i = 0; i < sep; ++i) {
    const char c = token[i];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
      return false;
    }
  }
  return sep + 3 < token.size();
}

std::string mask_token(std::string_view token) {
  if (looks_like_url(token)) return "_URL_";
  if (token.size() >= 2 && token[0] == '@' && is_word_char(token[1])) {
    std::size_t end = 1;
    while (end < token.size() && is_word_char(token[end])) ++end;
    return "_USER_" + std::string(token.substr(end));
  }
  return std::string(token);
}

double parse_fraction(std::string_view text) {
  double value = 0.0;
  std::string owned(text);
  std::istringstream in(owned);
  in >> value;
  if (!in || !in.eof()) {
    throw Error(ErrorKind::kInvalidConfig, "bad split fraction '" + owned + "'");
  }
  // Accept percentages (60/20/20) as well as fractions.
  return value > 1.0 ? value / 100.0 : value;
}

std::vector<std::string> split_on(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = text.find(sep, start);
    out.emplace_back(text.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

Protocol protocol_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_protocol(j.get<std::string>());
  if (j.is_object() && j.contains("train") && j["train"].is_array()) {
    ExplicitSplit s;
    s.train = j.at("train").get<std::vector<std::string>>();
    if (j.contains("val")) s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  }
  throw Error(ErrorKind::kInvalidConfig, "unrecognised protocol in manifest");
}

Post make_post(std::string id, std::string_view raw_text, std::size_t label) {
  Post p;
  p.id = std::move(id);
  p.text = deidentify(raw_text);
  p.label = label;
  p.char_length = code_point_count(p.text);
  p.word_count = whitespace_token_count(p.text);
  return p;
}

// Shuffled copy of `items` driven by `rng`; std::shuffle's algorithm is
// fixed by libstdc++ so results are stable for a given toolchain.
std::vector<std::size_t> shuffled(std::vector<std::size_t> items, std::mt19937_64& rng) {
  std::shuffle(items.begin(), items.end(), rng);
  return items;
}

std::vector<std::string> ids_sorted_by_position(const Dataset& ds,
                                                std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.posts[i].id);
  return out;
}

// Moves the last 10% of a shuffled training portion into validation.
void carve_validation(const Dataset& ds, std::vector<std::size_t> train, Fold& fold,
                      std::mt19937_64& rng) {
  train = shuffled(std::move(train), rng);
  std::size_t n_val = train.size() / 10;
  if (n_val == 0 && train.size() >= 2) n_val = 1;
  std::vector<std::size_t> val(train.end() - static_cast<std::ptrdiff_t>(n_val), train.end());
  train.resize(train.size() - n_val);
  fold.train = ids_sorted_by_position(ds, std::move(train));
  fold.val = ids_sorted_by_position(ds, std::move(val));
}

std::vector<std::vector<std::size_t>> members_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.classes.size());
  for (std::size_t i = 0; i < ds.posts.size(); ++i) by_class[ds.posts[i].label].push_back(i);
  return by_class;
}

LengthSummary summarize(const std::vector<std::size_t>& values) {
  LengthSummary s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.avg = static_cast<double>(std::accumulate(values.begin(), values.end(), std::size_t{0})) /
          static_cast<double>(values.size());
  return s;
}

nlohmann::json summary_json(const LengthSummary& s) {
  return {{"min", s.min}, {"max", s.max}, {"avg", s.avg}};
}

}  // namespace

Protocol parse_protocol(std::string_view spec) {
  if (spec.starts_with("kfold:")) {
    int k = 0;
    const auto rest = spec.substr(6);
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || k < 2) {
      throw Error(ErrorKind::kInvalidConfig, "bad kfold protocol '" + std::string(spec) + "'");
    }
    return KFold{k};
  }
  if (spec.starts_with("split:")) {
    const auto parts = split_on(spec.substr(6), '/');
    FixedSplit s;
    if (parts.size() == 2) {
      s = {parse_fraction(parts[0]), 0.0, parse_fraction(parts[1])};
    } else if (parts.size() == 3) {
      s = {parse_fraction(parts[0]), parse_fraction(parts[1]), parse_fraction(parts[2])};
    } else {
      throw Error(ErrorKind::kInvalidConfig, "bad split protocol '" + std::string(spec) + "'");
    }
    if (std::abs(s.train + s.val + s.test - 1.0) > 1e-6 || s.test <= 0.0 || s.train <= 0.0) {
      throw Error(ErrorKind::kInvalidConfig, "split fractions must sum to 1");
    }
    return s;
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown protocol '" + std::string(spec) + "'");
}

std::string describe_protocol(const Protocol& protocol) {
  if (const auto* k = std::get_if<KFold>(&protocol)) return "kfold:" + std::to_string(k->k);
  if (const auto* s = std::get_if<FixedSplit>(&protocol)) {
    std::ostringstream os;
    os << "split:" << s->train;
    if (s->val > 0.0) os << "/" << s->val;
    os << "/" << s->test;
    return os.str();
  }
  return "explicit";
}

void Dataset::reindex() {
  id_index_.clear();
  for (std::size_t i = 0; i < posts.size(); ++i) id_index_.emplace(posts[i].id, i);
}

std::size_t Dataset::index_of(std::string_view post_id) const {
  if (id_index_.size() == posts.size()) {
    const auto it = id_index_.find(std::string(post_id));
    if (it != id_index_.end()) return it->second;
  } else {
    for (std::size_t i = 0; i < posts.size(); ++i) {
      if (posts[i].id == post_id) return i;
    }
  }
  throw Error(ErrorKind::kMissingField, "unknown post id '" + std::string(post_id) + "'");
}

std::vector<std::size_t> Dataset::indices_of(const std::vector<std::string>& ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(index_of(id));
  return out;
}

std::string deidentify(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    out += mask_token(text.substr(i, end - i));
    i = end;
  }
  return out;
}

std::size_t code_point_count(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

Dataset load_dataset(const std::filesystem::path& path, const std::string& name,
                     const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open dataset " + path.string());

  Dataset ds;
  ds.name = name;
  std::optional<Protocol> protocol = options.protocol;
  std::optional<std::vector<std::string>> classes = options.classes;

  auto manifest_path = path;
  manifest_path += ".manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream mf(manifest_path);
    const auto manifest = nlohmann::json::parse(mf);
    if (!classes && manifest.contains("classes")) {
      classes = manifest.at("classes").get<std::vector<std::string>>();
    }
    if (!protocol && manifest.contains("protocol")) {
      protocol = protocol_from_json(manifest.at("protocol"));
    }
  }

  struct Raw {
    std::string id, text;
    nlohmann::json label;
  };
  std::vector<Raw> raws;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    const auto rec = nlohmann::json::parse(line);
    for (const char* key : {"id", "text", "label"}) {
      if (!rec.contains(key)) {
        throw Error(ErrorKind::kMissingField,
                    "line " + std::to_string(line_no) + " lacks '" + key + "'");
      }
    }
    Raw raw{rec.at("id").is_string() ? rec.at("id").get<std::string>() : rec.at("id").dump(),
            rec.at("text").get<std::string>(), rec.at("label")};
    if (whitespace_token_count(raw.text) == 0) {
      throw Error(ErrorKind::kMissingField, "line " + std::to_string(line_no) + " has empty text");
    }
    raws.push_back(std::move(raw));
  }
  if (raws.empty()) throw Error(ErrorKind::kEmptyDataset, path.string() + " has no records");

  if (classes) {
    ds.classes = *classes;
  } else {
    for (const auto& r : raws) {
      const auto label = r.label.is_string() ? r.label.get<std::string>() : r.label.dump();
      if (std::find(ds.classes.begin(), ds.classes.end(), label) == ds.classes.end()) {
        ds.classes.push_back(label);
      }
    }
  }
  if (ds.classes.size() < 2) {
    throw Error(ErrorKind::kInvalidConfig, "dataset needs at least two classes");
  }

  for (auto& r : raws) {
    std::size_t label = 0;
    if (r.label.is_number_integer() && !classes.has_value()) {
      label = static_cast<std::size_t>(
          std::find(ds.classes.begin(), ds.classes.end(), r.label.dump()) - ds.classes.begin());
    } else if (r.label.is_number_integer()) {
      const auto v = r.label.get<long long>();
      if (v < 0 || static_cast<std::size_t>(v) >= ds.classes.size()) {
        throw Error(ErrorKind::kUnknownLabel, "label index " + r.label.dump() + " out of range");
      }
      label = static_cast<std::size_t>(v);
    } else {
      const auto name_str = r.label.get<std::string>();
      const auto it = std::find(ds.classes.begin(), ds.classes.end(), name_str);
      if (it == ds.classes.end()) {
        throw Error(ErrorKind::kUnknownLabel,
                    "label '" + name_str + "' of post '" + r.id + "' not a declared class");
      }
      label = static_cast<std::size_t>(it - ds.classes.begin());
    }
    ds.posts.push_back(make_post(std::move(r.id), r.text, label));
  }
  ds.protocol = protocol.value_or(KFold{10});
  ds.reindex();
  return ds;
}

Dataset make_dataset(std::string name, std::vector<std::string> classes,
                     const std::vector<std::pair<std::string, std::string>>& id_text,
                     const std::vector<std::size_t>& labels, Protocol protocol) {
  if (id_text.empty()) throw Error(ErrorKind::kEmptyDataset, "no records");
  if (id_text.size() != labels.size()) {
    throw Error(ErrorKind::kLengthMismatch, "ids and labels differ in length");
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.classes = std::move(classes);
  ds.protocol = std::move(protocol);
  for (std::size_t i = 0; i < id_text.size(); ++i) {
    if (labels[i] >= ds.classes.size()) {
      throw Error(ErrorKind::kUnknownLabel, "label index out of range for " + id_text[i].first);
    }
    ds.posts.push_back(make_post(id_text[i].first, id_text[i].second, labels[i]));
  }
  ds.reindex();
  return ds;
}

SplitPlan make_splits(const Dataset& dataset, std::uint64_t seed) {
  if (dataset.posts.empty()) throw Error(ErrorKind::kEmptyDataset, "cannot split empty dataset");
  std::mt19937_64 rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  const auto by_class = members_by_class(dataset);

  if (const auto* kf = std::get_if<KFold>(&dataset.protocol)) {
    const auto k = static_cast<std::size_t>(kf->k);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (!by_class[c].empty() && by_class[c].size() < k) {
        throw Error(ErrorKind::kInfeasibleStratification,
                    "class '" + dataset.classes[c] + "' has " +
                        std::to_string(by_class[c].size()) + " posts for " +
                        std::to_string(k) + " folds");
      }
    }
    // Deal each class's shuffled members round-robin; the running offset
    // keeps fold sizes within one of each other.
    std::vector<std::vector<std::size_t>> fold_members(k);
    std::size_t cursor = 0;
    for (const auto& members : by_class) {
      for (auto idx : shuffled(members, rng)) fold_members[cursor++ % k].push_back(idx);
    }
    for (std::size_t f = 0; f < k; ++f) {
      Fold fold;
      fold.test = ids_sorted_by_position(dataset, fold_members[f]);
      std::vector<std::size_t> train;
      for (std::size_t g = 0; g < k; ++g) {
        if (g != f) train.insert(train.end(), fold_members[g].begin(), fold_members[g].end());
      }
      std::sort(train.begin(), train.end());
      carve_validation(dataset, std::move(train), fold, rng);
      plan.folds.push_back(std::move(fold));
    }
    return plan;
  }

  if (const auto* fs = std::get_if<FixedSplit>(&dataset.protocol)) {
    std::vector<std::size_t> train, val, test;
    for (const auto& members : by_class) {
      const auto order = shuffled(members, rng);
      const auto n = static_cast<double>(order.size());
      const auto n_test = static_cast<std::size_t>(std::llround(fs->test * n));
      const auto n_val = static_cast<std::size_t>(std::llround(fs->val * n));
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_test) {
          test.push_back(order[i]);
        } else if (i < n_test + n_val) {
          val.push_back(order[i]);
        } else {
          train.push_back(order[i]);
        }
      }
    }
    Fold fold;
    fold.test = ids_sorted_by_position(dataset, std::move(test));
    if (fs->val > 0.0) {
      fold.train = ids_sorted_by_position(dataset, std::move(train));
      fold.val = ids_sorted_by_position(dataset, std::move(val));
    } else {
      std::sort(train.begin(), train.end());
      carve_validation(dataset, std::move(train), fold, rng);
    }
    plan.folds.push_back(std::move(fold));
    return plan;
  }

  const auto& ex = std::get<ExplicitSplit>(dataset.protocol);
  Fold fold;
  fold.test = ex.test;
  if (ex.val.empty()) {
    auto train = dataset.indices_of(ex.train);
    std::sort(train.begin(), train.end());
    carve_validation(dataset, std::move(train), fold, rng);
  } else {
    fold.train = ex.train;
    fold.val = ex.val;
  }
  plan.folds.push_back(std::move(fold));
  return plan;
}

DatasetStats compute_stats(const Dataset& dataset) {
  if (dataset.posts.empty()) throw Error(ErrorKind::kEmptyDataset, "no posts");
  DatasetStats stats;
  stats.name = dataset.name;
  stats.total = dataset.posts.size();
  std::vector<std::size_t> all_len, all_words;
  std::vector<std::vector<std::size_t>> len(dataset.classes.size()), words(dataset.classes.size());
  for (const auto& p : dataset.posts) {
    all_len.push_back(p.char_length);
    all_words.push_back(p.word_count);
    len[p.label].push_back(p.char_length);
    words[p.label].push_back(p.word_count);
  }
  stats.length = summarize(all_len);
  stats.words = summarize(all_words);
  for (std::size_t c = 0; c < dataset.classes.size(); ++c) {
    ClassStats cs;
    cs.name = dataset.classes[c];
    cs.count = len[c].size();
    cs.percentage = 100.0 * static_cast<double>(cs.count) / static_cast<double>(stats.total);
    cs.length = summarize(len[c]);
    cs.words = summarize(words[c]);
    stats.classes.push_back(std::move(cs));
  }
  return stats;
}

void to_json(nlohmann::json& j, const Fold& fold) {
  j = {{"train", fold.train}, {"val", fold.val}, {"test", fold.test}};
}

void from_json(const nlohmann::json& j, Fold& fold) {
  fold.train = j.at("train").get<std::vector<std::string>>();
  fold.val = j.at("val").get<std::vector<std::string>>();
  fold.test = j.at("test").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const SplitPlan& plan) {
  j = {{"seed", plan.seed}, {"folds", plan.folds}};
}

void from_json(const nlohmann::json& j, SplitPlan& plan) {
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.folds = j.at("folds").get<std::vector<Fold>>();
}

void to_json(nlohmann::json& j, const DatasetStats& stats) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : stats.classes) {
    classes.push_back({{"class", c.name},
                       {"count", c.count},
                       {"percent", c.percentage},
                       {"length", summary_json(c.length)},
                       {"words", summary_json(c.words)}});
  }
  j = {{"dataset", stats.name},
       {"num_classes", stats.classes.size()},
       {"total_samples", stats.total},
       {"length", summary_json(stats.length)},
       {"words", summary_json(stats.words)},
       {"classes", classes}};
}

}  // namespace mmkd::corpus
