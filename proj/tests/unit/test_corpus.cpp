#include <doctest.h>

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/corpus/fixtures.hpp"
#include "mmkd/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace mmkd;
using namespace mmkd::corpus;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mmkd_corpus_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an mmkd::Error");
  return ErrorKind::kStageFailure;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

TEST_CASE("load_dataset reads a TwitSuicide-shaped file") {
  const auto path = temp_file("twitsuicide.jsonl");
  write_dataset(twitsuicide_shaped(), path);
  const auto ds = load_dataset(path, "TwitSuicide");
  CHECK(ds.posts.size() == 660);
  CHECK(ds.classes.size() == 3);
  CHECK(std::holds_alternative<KFold>(ds.protocol));
  CHECK(ds.posts.front().id == "ts0");
}

TEST_CASE("load_dataset error paths") {
  SUBCASE("empty file") {
    const auto path = temp_file("empty.jsonl");
    std::ofstream(path) << "";
    CHECK(kind_of([&] { load_dataset(path, "empty"); }) == ErrorKind::kEmptyDataset);
  }
  SUBCASE("label outside the declared classes") {
    const auto path = temp_file("severe.jsonl");
    std::ofstream(path) << R"({"id":"1","text":"so low","label":"SEVERE+"})" << '\n';
    LoadOptions opts;
    opts.classes = std::vector<std::string>{"ND", "MI", "MO", "SE"};
    CHECK(kind_of([&] { load_dataset(path, "dep", opts); }) == ErrorKind::kUnknownLabel);
  }
  SUBCASE("record without text") {
    const auto path = temp_file("notext.jsonl");
    std::ofstream(path) << R"({"id":"1","label":"a"})" << '\n';
    CHECK(kind_of([&] { load_dataset(path, "x"); }) == ErrorKind::kMissingField);
  }
}

TEST_CASE("load_dataset masks text and measures code points") {
  const auto path = temp_file("masked.jsonl");
  std::ofstream(path) << R"({"id":"a","text":"@bob see http://a.b/x \ud83d\ude22","label":"x"})" << '\n'
                      << R"({"id":"b","text":"fine thanks","label":"y"})" << '\n';
  const auto ds = load_dataset(path, "m");
  CHECK(ds.posts[0].text == "_USER_ see _URL_ \xF0\x9F\x98\xA2");
  CHECK(ds.posts[0].char_length == 18);
  CHECK(ds.posts[0].word_count == 4);
  CHECK(ds.classes == std::vector<std::string>{"x", "y"});
}

TEST_CASE("deidentify replaces handles and URLs only") {
  CHECK(deidentify("@bob see http://a.b/x") == "_USER_ see _URL_");
  CHECK(deidentify("no handles here") == "no handles here");
  CHECK(deidentify("mail me a@b.com") == "mail me a@b.com");
  CHECK(deidentify("RT @anna_1: visit www.example.org now") == "RT _USER_: visit _URL_ now");
  CHECK(deidentify("a lone @ sign") == "a lone @ sign");
}

TEST_CASE("deidentify is idempotent and preserves token counts") {
  std::mt19937_64 rng(42);
  const std::vector<std::string> pieces = {"@x", "@user_9", "hi", "https://q.io/a", "www.z.com",
                                           "a@b.c", ":)", "@", "ftp://h/p", "\xF0\x9F\x98\x80",
                                           "tab\there", "x://"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> len(0, 8);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (int i = len(rng); i > 0; --i) text += pieces[pick(rng)] + (i % 3 == 0 ? "  " : " ");
    const auto once = deidentify(text);
    CHECK(deidentify(once) == once);
    CHECK(whitespace_token_count(once) == whitespace_token_count(text));
  }
}

TEST_CASE("make_splits produces stratified deterministic folds") {
  const auto ds = toy_dataset(40, 3, KFold{10});
  const auto plan = make_splits(ds, 7);
  REQUIRE(plan.folds.size() == 10);
  std::multiset<std::string> tested;
  for (const auto& fold : plan.folds) {
    CHECK(fold.test.size() == 4);
    std::size_t class0 = 0;
    for (const auto& id : fold.test) class0 += ds.post(id).label == 0 ? 1 : 0;
    CHECK(class0 == 2);
    std::set<std::string> all;
    for (const auto* part : {&fold.train, &fold.val, &fold.test}) {
      for (const auto& id : *part) CHECK(all.insert(id).second);
    }
    CHECK(all.size() == ds.posts.size());
    CHECK(fold.val.size() == 3);
    tested.insert(fold.test.begin(), fold.test.end());
  }
  CHECK(tested.size() == ds.posts.size());
  CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == ds.posts.size());

  const nlohmann::json a = plan;
  const nlohmann::json b = make_splits(ds, 7);
  CHECK(a.dump() == b.dump());
  const nlohmann::json c = make_splits(ds, 8);
  CHECK(a.dump() != c.dump());
}

TEST_CASE("make_splits rejects folds that cannot be stratified") {
  std::vector<std::pair<std::string, std::string>> records;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 9; ++i) {
    records.emplace_back("a" + std::to_string(i), "text a");
    labels.push_back(0);
  }
  for (int i = 0; i < 20; ++i) {
    records.emplace_back("b" + std::to_string(i), "text b");
    labels.push_back(1);
  }
  const auto ds = make_dataset("small", {"A", "B"}, records, labels, KFold{10});
  CHECK(kind_of([&] { make_splits(ds, 1); }) == ErrorKind::kInfeasibleStratification);
}

TEST_CASE("fixed splits honour declared fractions and carve validation") {
  auto ds = toy_dataset(40, 5, parse_protocol("split:80/20"));
  auto plan = make_splits(ds, 3);
  REQUIRE(plan.folds.size() == 1);
  CHECK(plan.folds[0].test.size() == 8);
  CHECK(plan.folds[0].val.size() == 3);
  CHECK(plan.folds[0].train.size() == 29);

  ds.protocol = parse_protocol("split:0.6/0.2/0.2");
  plan = make_splits(ds, 3);
  CHECK(plan.folds[0].train.size() == 24);
  CHECK(plan.folds[0].val.size() == 8);
  CHECK(plan.folds[0].test.size() == 8);

  CHECK(kind_of([] { parse_protocol("split:0.5/0.2"); }) == ErrorKind::kInvalidConfig);
  CHECK(kind_of([] { parse_protocol("holdout"); }) == ErrorKind::kInvalidConfig);
}

TEST_CASE("compute_stats reports class shares and length aggregates") {
  SUBCASE("balanced classes") {
    const auto ds = make_dataset("b", {"A", "B"}, {{"1", "x"}, {"2", "y"}, {"3", "z"}, {"4", "w"}},
                                 {0, 0, 1, 1}, KFold{2});
    const auto stats = compute_stats(ds);
    CHECK(stats.classes[0].percentage == doctest::Approx(50.0));
    CHECK(stats.classes[1].percentage == doctest::Approx(50.0));
  }
  SUBCASE("TwitSuicide class layout") {
    const auto stats = compute_stats(twitsuicide_shaped());
    CHECK(stats.classes[0].count == 103);
    CHECK(round2(stats.classes[0].percentage) == doctest::Approx(15.61));
    CHECK(round2(stats.classes[1].percentage) == doctest::Approx(40.00));
    CHECK(round2(stats.classes[2].percentage) == doctest::Approx(44.39));
    double total = 0.0;
    for (const auto& c : stats.classes) total += c.percentage;
    CHECK(total == doctest::Approx(100.0).epsilon(1e-4));
    CHECK(stats.words.min >= 3);
    CHECK(stats.words.max <= 31);
  }
  SUBCASE("word-count aggregates") {
    const auto ds = make_dataset("w", {"A", "B"},
                                 {{"1", "a b c"},
                                  {"2", "one two three four five six seven eight nine ten eleven "
                                        "twelve thirteen fourteen fifteen sixteen seventeen "
                                        "eighteen nineteen twenty 21 22 23 24 25 26 27 28 29 30 31"}},
                                 {0, 1}, KFold{2});
    const auto stats = compute_stats(ds);
    CHECK(stats.words.min == 3);
    CHECK(stats.words.max == 31);
    CHECK(stats.words.avg == doctest::Approx(17.0));
  }
}

TEST_CASE("compute_stats is invariant under post reordering") {
  auto ds = toy_dataset(40, 9);
  const nlohmann::json before = compute_stats(ds);
  std::mt19937_64 rng(1);
  std::shuffle(ds.posts.begin(), ds.posts.end(), rng);
  ds.reindex();
  const nlohmann::json after = compute_stats(ds);
  CHECK(before.dump() == after.dump());
}
