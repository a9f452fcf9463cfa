#include <doctest.h>

#include "mmkd/corpus/fixtures.hpp"
#include "mmkd/error.hpp"
#include "mmkd/experiment/search_space.hpp"
#include "mmkd/text/text_teacher.hpp"
#include "mmkd/text/tokenizer.hpp"

#include <filesystem>
#include <numeric>

using namespace mmkd;
using namespace mmkd::text;

namespace {

corpus::Fold everything(const corpus::Dataset& ds) {
  corpus::Fold f;
  for (const auto& p : ds.posts) f.train.push_back(p.id);
  return f;
}

EncoderSpec toy16() {
  EncoderSpec s = resolve_backend("toy-deterministic");
  s.width = 16;
  return s;
}

double train_accuracy(const Teacher& t, const corpus::Dataset& ds) {
  std::vector<std::string> ids;
  for (const auto& p : ds.posts) ids.push_back(p.id);
  return evaluate_teacher(t, ds, ids).accuracy;
}

}  // namespace

TEST_CASE("tokenizer keeps cues and placeholders atomic") {
  CHECK(tokenize("I feel SO alone... :( _USER_") ==
        std::vector<std::string>{"i", "feel", "so", "alone", "...", ":(", "_USER_"});
  CHECK(tokenize("don't stop!") == std::vector<std::string>{"don't", "stop", "!"});
  CHECK(tokenize("sad\xF0\x9F\x98\xA2 _URL_") ==
        std::vector<std::string>{"sad", "\xF0\x9F\x98\xA2", "_URL_"});
  CHECK(is_emoticon(":'("));
  CHECK(is_emoticon("<3"));
  CHECK(tokenize("").empty());
}

TEST_CASE("backend registry") {
  CHECK(resolve_backend("bert-base-uncased").width == 768);
  CHECK(resolve_backend("mental-bert").seed != resolve_backend("roberta-base").seed);
  CHECK_THROWS_AS(resolve_backend("gpt-neo"), Error);
  CHECK(known_backends().size() == 5);
}

TEST_CASE("encoder output shapes and determinism") {
  const TextEncoder enc(toy16(), {"sad"});
  const auto a = enc.encode("so sad today");
  CHECK(a.summary.cols() == 16);
  CHECK(a.tokens.rows() == 3);
  const TextEncoder enc2(toy16(), {"sad"});
  CHECK(enc2.encode("so sad today").summary.value() == a.summary.value());
  CHECK(enc.encode("").tokens.rows() == 1);
  EncoderSpec shortspec = toy16();
  shortspec.max_length = 2;
  CHECK(TextEncoder(shortspec, {}).encode("a b c d").tokens.rows() == 2);
}

TEST_CASE("head validation follows the divisibility and range rules") {
  HeadConfig best;
  best.layers = 10;
  best.heads = 8;
  best.dropout = 0.01;
  CHECK_NOTHROW(validate_head(best, resolve_backend("bert-base-uncased").width));
  CHECK(experiment::text_teacher_space().contains(
      {{"dropout", 0.01}, {"layers", 10}, {"heads", 8}, {"lr", 4e-5}, {"weight_decay", 0.0},
       {"epochs", 4}}));

  HeadConfig five = best;
  five.heads = 5;
  try {
    validate_head(five, 768);
    FAIL("expected IncompatibleHead");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIncompatibleHead);
  }
  HeadConfig deep = best;
  deep.layers = 13;
  CHECK_THROWS_AS(validate_head(deep, 768), Error);
}

TEST_CASE("toy teacher predicts distributions over the classes") {
  const auto ds = corpus::toy_dataset(20, 4);
  const auto teacher = build_text_teacher(toy16(), HeadConfig{}, ds, 3);
  for (const auto& post : ds.posts) {
    const auto p = teacher.predict_proba(post);
    REQUIRE(p.size() == 2);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p == teacher.predict_proba(post));
  }
}

TEST_CASE("fine-tuning separates a toy set and is reproducible") {
  const auto ds = corpus::toy_dataset(20, 4);
  FinetuneConfig cfg;
  cfg.lr = 3e-3;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.seed = 1;
  cfg.allow_out_of_space = true;
  const auto run = [&] {
    return finetune_teacher(build_text_teacher(toy16(), HeadConfig{}, ds, 3), ds, everything(ds),
                            cfg);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.teacher->checksum() == b.teacher->checksum());
  CHECK(train_accuracy(*a.teacher, ds) == 1.0);
  CHECK(a.log.size() == 5);

  for (const auto& post : ds.posts) {
    auto padded = post;
    padded.text += "   ";
    CHECK(eval::argmax(a.teacher->predict_proba(padded)) ==
          eval::argmax(a.teacher->predict_proba(post)));
  }

  const auto dir = std::filesystem::temp_directory_path() / "mmkd_text_teacher";
  std::filesystem::remove_all(dir);
  a.teacher->save(dir);
  const auto loaded = TextTeacher::load(dir);
  CHECK(loaded.checksum() == a.teacher->checksum());
  CHECK(loaded.predict_proba(ds.posts[0]) == a.teacher->predict_proba(ds.posts[0]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("out-of-space learning rate is rejected without the override") {
  const auto ds = corpus::toy_dataset(20, 4);
  FinetuneConfig cfg;
  cfg.lr = 1e-3;
  try {
    finetune_teacher(build_text_teacher(toy16(), HeadConfig{}, ds, 3), ds, everything(ds), cfg);
    FAIL("expected RangeError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRangeError);
  }
}
