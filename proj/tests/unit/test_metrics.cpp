#include <doctest.h>

#include "mmkd/error.hpp"
#include "mmkd/eval/metrics.hpp"
#include "mmkd/experiment/search_space.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace mmkd;

namespace {

struct OracleScores {
  double accuracy = 0.0;
  double macro = 0.0;
  double weighted = 0.0;
  std::vector<double> f1;
};

// Explicit per-class counting loops, independent of the confusion matrix.
OracleScores brute_force(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p,
                         std::size_t k) {
  OracleScores o;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i] ? 1 : 0;
  o.accuracy = static_cast<double>(correct) / static_cast<double>(t.size());
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == c && p[i] == c) tp += 1;
      if (t[i] != c && p[i] == c) fp += 1;
      if (t[i] == c && p[i] != c) fn += 1;
      if (t[i] == c) support += 1;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    o.f1.push_back(f);
    o.macro += f / static_cast<double>(k);
    o.weighted += f * support / static_cast<double>(t.size());
  }
  return o;
}

std::vector<std::string> names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c) out.push_back("c" + std::to_string(c));
  return out;
}

}  // namespace

TEST_CASE("hand-computed confusion case") {
  const std::vector<std::size_t> t = {0, 0, 0, 1}, p = {0, 0, 1, 1};
  const auto r = eval::confusion_metrics(t, p, {"a", "b"});
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.macro_f1 == doctest::Approx(0.7333).epsilon(1e-4));
  CHECK(r.weighted_f1 == doctest::Approx(0.7667).epsilon(1e-4));
  CHECK(r.confusion[0][1] == 1);
}

TEST_CASE("perfect predictions and absent classes") {
  const std::vector<std::size_t> t = {0, 1, 1}, p = {0, 1, 1};
  auto r = eval::confusion_metrics(t, p, {"a", "b"});
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.weighted_f1 == 1.0);
  r = eval::confusion_metrics(t, p, {"a", "b", "never"});
  CHECK(r.per_class_f1[2] == 0.0);
  CHECK(r.macro_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("length mismatch and out-of-range labels are rejected") {
  const std::vector<std::size_t> a = {0, 1}, b = {0}, c = {0, 2};
  CHECK_THROWS_AS(eval::confusion_metrics(a, b, {"x", "y"}), Error);
  CHECK_THROWS_AS(eval::confusion_metrics(a, c, {"x", "y"}), Error);
}

TEST_CASE("confusion_metrics agrees with a brute-force oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
    const std::size_t n = 1 + rng() % 40;
    std::vector<std::size_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng() % k;
      p[i] = rng() % k;
    }
    const auto r = eval::confusion_metrics(t, p, names(k));
    const auto o = brute_force(t, p, k);
    CHECK(std::abs(r.accuracy - o.accuracy) < 1e-9);
    CHECK(std::abs(r.macro_f1 - o.macro) < 1e-9);
    CHECK(std::abs(r.weighted_f1 - o.weighted) < 1e-9);
    for (std::size_t c = 0; c < k; ++c) CHECK(std::abs(r.per_class_f1[c] - o.f1[c]) < 1e-9);
    std::size_t trace = 0;
    for (std::size_t c = 0; c < k; ++c) {
      CHECK(std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0}) ==
            r.support[c]);
      trace += r.confusion[c][c];
    }
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(trace) / static_cast<double>(n)));
  }
}

TEST_CASE("weighted equals macro under equal supports") {
  const std::vector<std::size_t> t = {0, 0, 1, 1, 2, 2}, p = {0, 1, 1, 2, 2, 0};
  const auto r = eval::confusion_metrics(t, p, names(3));
  CHECK(r.weighted_f1 == doctest::Approx(r.macro_f1).epsilon(1e-15));
}

TEST_CASE("metrics are invariant under class relabeling") {
  std::mt19937_64 rng(5);
  std::vector<std::size_t> t(30), p(30);
  for (std::size_t i = 0; i < 30; ++i) {
    t[i] = rng() % 4;
    p[i] = rng() % 4;
  }
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  std::vector<std::size_t> tp(30), pp(30);
  for (std::size_t i = 0; i < 30; ++i) {
    tp[i] = perm[t[i]];
    pp[i] = perm[p[i]];
  }
  const auto a = eval::confusion_metrics(t, p, names(4));
  auto relabeled = names(4);
  for (std::size_t c = 0; c < 4; ++c) relabeled[perm[c]] = "c" + std::to_string(c);
  const auto b = eval::confusion_metrics(tp, pp, relabeled);
  CHECK(a.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-15));
  CHECK(a.weighted_f1 == doctest::Approx(b.weighted_f1).epsilon(1e-15));
  for (std::size_t c = 0; c < 4; ++c) CHECK(a.per_class_f1[c] == doctest::Approx(b.per_class_f1[perm[c]]));
}

TEST_CASE("reports round-trip through JSON") {
  const std::vector<std::size_t> t = {0, 1, 2, 2}, p = {0, 2, 2, 1};
  const auto r = eval::confusion_metrics(t, p, names(3));
  const nlohmann::json j = r;
  const auto back = j.get<eval::MetricsReport>();
  const nlohmann::json again = back;
  CHECK(j.dump() == again.dump());
}

TEST_CASE("search spaces encode their grids") {
  const auto student = experiment::student_space();
  CHECK(student.find("dropout")->contains(0.05));
  CHECK_FALSE(student.find("dropout")->contains(0.2));
  CHECK(experiment::text_teacher_space().find("lr")->contains(4e-5));
  CHECK(experiment::text_teacher_space().find("layers")->contains(10));
  CHECK(experiment::text_teacher_space().find("heads")->contains(8));
  CHECK(experiment::emotion_teacher_space().find("hidden_dim")->contains(400));
  CHECK(experiment::emotion_teacher_space().find("hidden_layers")->contains(2));
  CHECK(experiment::audio_teacher_space().find("factor")->contains(0.5));
  CHECK(experiment::audio_teacher_space().find("patience")->contains(4));
  CHECK_THROWS_AS(experiment::require_in_space(experiment::text_teacher_space(), {{"lr", 0.3}}),
                  Error);
  CHECK_NOTHROW(experiment::require_in_space(experiment::text_teacher_space(),
                                             {{"lr", 4e-5}, {"unrelated", 7}}));
  CHECK_THROWS_AS(experiment::space_by_name("nope"), Error);
  CHECK(student.cardinality() > 1);
}
