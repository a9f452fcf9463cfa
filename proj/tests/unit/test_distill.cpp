#include <doctest.h>

#include "gradcheck.hpp"
#include "mmkd/corpus/fixtures.hpp"
#include "mmkd/distill/student.hpp"
#include "mmkd/error.hpp"
#include "mmkd/nn/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace mmkd;
using namespace mmkd::distill;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an mmkd::Error");
  return ErrorKind::kStageFailure;
}

std::vector<double> random_dist(std::size_t c, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> p(c);
  double total = 0.0;
  for (auto& v : p) total += (v = g(rng) + 1e-9);
  for (auto& v : p) v /= total;
  return p;
}

// Scores posts by a hash of their id; `bias` tilts towards the gold label.
class FakeTeacher final : public Teacher {
 public:
  FakeTeacher(Modality m, double bias, const corpus::Dataset& ds) : m_(m), bias_(bias), ds_(ds) {}
  Modality modality() const override { return m_; }
  std::size_t num_classes() const override { return ds_.classes.size(); }
  std::vector<double> predict_proba(const corpus::Post& post) const override {
    std::vector<double> p(num_classes(), 1.0);
    p[post.label] += bias_;
    p[std::hash<std::string>{}(post.id) % p.size()] += 0.5;
    return renormalize(p);
  }
  std::string checksum() const override { return "fake"; }

 private:
  Modality m_;
  double bias_;
  const corpus::Dataset& ds_;
};

DistillConfig toy_config() {
  DistillConfig cfg;
  cfg.head.layers = 2;
  cfg.head.heads = 2;
  cfg.head.dropout = 0.0;
  cfg.lr = 3e-3;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 11;
  cfg.allow_out_of_space = true;
  return cfg;
}

text::EncoderSpec toy_backend() {
  auto spec = text::resolve_backend("toy-deterministic");
  spec.width = 16;
  return spec;
}

corpus::Fold all_train(const corpus::Dataset& ds) {
  corpus::Fold f;
  for (const auto& p : ds.posts) f.train.push_back(p.id);
  return f;
}

}  // namespace

TEST_CASE("teacher soft targets average the teacher distributions") {
  const std::vector<std::vector<double>> three = {{0.8, 0.2}, {0.6, 0.4}, {0.4, 0.6}};
  const auto avg = teacher_soft_targets(std::span<const std::vector<double>>(three));
  CHECK(avg[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(avg[1] == doctest::Approx(0.4).epsilon(1e-15));
  const std::vector<std::vector<double>> one = {{0.3, 0.7}};
  CHECK(teacher_soft_targets(std::span<const std::vector<double>>(one)) == one[0]);
  const std::vector<std::vector<double>> bad = {{0.5, 0.5}, {0.2, 0.3, 0.5}};
  CHECK(kind_of([&] { teacher_soft_targets(std::span<const std::vector<double>>(bad)); }) ==
        ErrorKind::kClassMismatch);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> outs;
    for (int t = 0; t < 3; ++t) outs.push_back(random_dist(4, rng));
    const auto a = teacher_soft_targets(std::span<const std::vector<double>>(outs));
    CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    std::shuffle(outs.begin(), outs.end(), rng);
    CHECK(teacher_soft_targets(std::span<const std::vector<double>>(outs)) == a);
  }
}

TEST_CASE("kd loss matches direct summation") {
  const std::vector<double> soft = {0.6, 0.4}, student = {0.5, 0.5};
  CHECK(kd_loss(student, soft) == doctest::Approx(0.6 * std::log(1.2) + 0.4 * std::log(0.8)));
  CHECK(std::abs(kd_loss(student, soft) - 0.02014) < 1e-5);
  CHECK(kd_loss(soft, soft) == 0.0);
  const double big = kd_loss(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0});
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(-std::log(1e-12)));

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> classes(2, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = classes(rng);
    const auto p = random_dist(c, rng);
    const auto q = random_dist(c, rng);
    double oracle = 0.0;
    for (std::size_t k = 0; k < c; ++k) oracle += p[k] * std::log(p[k] / std::max(q[k], 1e-12));
    const double kl = kd_loss(q, p);
    CHECK(kl >= 0.0);
    CHECK(kl > 0.0);
    CHECK(kl == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(kd_loss(p, p) == 0.0);
  }
}

TEST_CASE("differentiable losses agree with the scalar forms") {
  std::mt19937_64 rng(5);
  for (double temperature : {1.0, 2.0, 0.5}) {
    const nn::Var logits = nn::Var::parameter(nn::gaussian(1, 3, 1.5, rng));
    const auto soft = random_dist(3, rng);
    const auto probs = text::softmax(logits.value());
    CHECK(kd_loss(logits, soft, temperature).scalar() ==
          doctest::Approx(kd_loss(probs, soft, temperature)).epsilon(1e-10));
    CHECK(task_loss(logits, 2).scalar() == doctest::Approx(task_loss(probs, 2)).epsilon(1e-12));
  }
  CHECK(kind_of([] { soften(std::vector<double>{0.5, 0.5}, 0.0); }) == ErrorKind::kInvalidConfig);
}

TEST_CASE("task loss examples") {
  CHECK(task_loss(std::vector<double>{0.0, 1.0}, 1) == 0.0);
  const std::vector<double> uniform(3, 1.0 / 3.0);
  CHECK(task_loss(uniform, 0) == doctest::Approx(std::log(3.0)));
  const std::vector<std::vector<double>> batch = {{1.0, 0.0, 0.0}, uniform};
  const std::vector<std::size_t> gold = {0, 2};
  CHECK(task_loss(batch, gold) == doctest::Approx(0.5493).epsilon(1e-4));
}

TEST_CASE("student input fusion") {
  std::mt19937_64 rng(1);
  const nn::Var states = nn::Var::constant(nn::gaussian(5, 768, 1.0, rng));
  CHECK(fuse_student_inputs(states, std::nullopt, std::nullopt, FusionMode::kTextOnly, nullptr)
            .node() == states.node());

  const nn::Linear proj = make_fusion_projector(768, 7, 32, FusionMode::kBoth, rng);
  CHECK(proj.in_features() == 807);
  CHECK(proj.out_features() == 768);
  const nn::RowVector emo = nn::RowVector::Ones(7), aud = nn::RowVector::Ones(32);
  const nn::Var fused = fuse_student_inputs(states, emo, aud, FusionMode::kBoth, &proj);
  CHECK(fused.rows() == 5);
  CHECK(fused.cols() == 768);
  CHECK(fused.value().bottomRows(4) == states.value().bottomRows(4));

  const nn::Linear audio_proj = make_fusion_projector(768, 7, 32, FusionMode::kAudio, rng);
  CHECK(audio_proj.in_features() == 800);
  CHECK(kind_of([&] {
          fuse_student_inputs(states, emo, std::nullopt, FusionMode::kAudio, &audio_proj);
        }) == ErrorKind::kMissingModality);
  for (FusionMode m : all_fusion_modes()) CHECK(parse_fusion_mode(fusion_mode_name(m)) == m);
}

TEST_CASE("combined loss gradient matches finite differences") {
  const auto ds = corpus::make_dataset("g", {"a", "b"},
                                       {{"1", "so sad"}, {"2", "fun day"}, {"3", "cry"}, {"4", "great"}},
                                       {0, 1, 0, 1}, corpus::KFold{2});
  emotion::EmbeddingTable emo({"1", "2", "3", "4"}, nn::Matrix::Random(4, 7));
  emotion::EmbeddingTable aud({"1", "2", "3", "4"}, nn::Matrix::Random(4, 5));
  auto cfg = toy_config();
  cfg.fusion = FusionMode::kBoth;
  auto spec = toy_backend();
  spec.width = 8;
  const auto student = build_student(spec, cfg, ds, {emo, aud});
  std::mt19937_64 rng(2);
  std::vector<std::vector<double>> soft;
  for (int i = 0; i < 4; ++i) soft.push_back(random_dist(2, rng));

  const auto loss = [&] {
    nn::Var total;
    for (std::size_t i = 0; i < 4; ++i) {
      const nn::Var z = student.logits(ds.posts[i], {});
      const nn::Var l = nn::add(task_loss(z, ds.posts[i].label), kd_loss(z, soft[i]));
      total = total.defined() ? nn::add(total, l) : l;
    }
    return nn::scale(total, 0.25);
  };
  nn::ParameterList params;
  student.collect(params);
  const auto r = testing::gradcheck(loss, params);
  CHECK(r.checked > 500);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("teacher cache round-trips and reports gaps") {
  const auto ds = corpus::toy_dataset(8, 2);
  FakeTeacher text_t(Modality::kText, 2.0, ds), emo_t(Modality::kEmotion, 1.0, ds);
  const Teacher* teachers[] = {&text_t, &emo_t};
  const auto cache = build_teacher_cache(teachers, ds);
  const Modality only_text[] = {Modality::kText};
  CHECK(cache.soft_targets("p0", only_text) == text_t.predict_proba(ds.posts[0]));
  const auto path = std::filesystem::temp_directory_path() / "mmkd_cache" / "teacher_outputs.json";
  save_teacher_cache(cache, path);
  const auto back = load_teacher_cache(path);
  const Modality both[] = {Modality::kEmotion, Modality::kText};
  CHECK(back.soft_targets("p3", both) == cache.soft_targets("p3", both));
  const Modality audio_only[] = {Modality::kAudio};
  CHECK(kind_of([&] { cache.soft_targets("p1", audio_only); }) == ErrorKind::kMissingTeacherOutput);
  CHECK(kind_of([&] { cache.soft_targets("nope", only_text); }) ==
        ErrorKind::kMissingTeacherOutput);
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("student training logs task and kd components") {
  const auto ds = corpus::toy_dataset(16, 4);
  FakeTeacher text_t(Modality::kText, 3.0, ds), emo_t(Modality::kEmotion, 1.0, ds),
      aud_t(Modality::kAudio, 0.5, ds);
  const Teacher* teachers[] = {&text_t, &emo_t, &aud_t};
  const auto cache = build_teacher_cache(teachers, ds);
  const auto fold = all_train(ds);

  auto cfg = toy_config();
  const auto run = [&](const DistillConfig& c) {
    return train_student(build_student(toy_backend(), c, ds), ds, fold, cache, c);
  };
  const auto full = run(cfg);
  REQUIRE(full.steps.size() == 12);
  for (const auto& s : full.steps) CHECK(std::abs(s.total - (s.task + s.kd)) <= 1e-9);
  CHECK(full.epochs.size() == 3);
  CHECK(full.epochs.back().epoch == 3);

  auto permuted = cfg;
  permuted.teacher_set = {Modality::kAudio, Modality::kText, Modality::kEmotion};
  const auto again = run(permuted);
  REQUIRE(again.steps.size() == full.steps.size());
  for (std::size_t i = 0; i < full.steps.size(); ++i) {
    CHECK(again.steps[i].total == full.steps[i].total);
  }
  CHECK(again.student->checksum() == full.student->checksum());

  auto text_only = cfg;
  text_only.teacher_set = {Modality::kText};
  const auto single = run(text_only);
  CHECK(single.steps[0].task == full.steps[0].task);
  CHECK(single.steps[0].kd != full.steps[0].kd);

  auto no_kd = cfg;
  no_kd.use_kd = false;
  const auto plain = run(no_kd);
  CHECK(plain.steps[0].kd == 0.0);
  CHECK(plain.steps[0].total == plain.steps[0].task);

  auto missing = cfg;
  missing.teacher_set = {Modality::kText};
  TeacherCache partial = cache;
  partial.outputs.erase("p5");
  CHECK(kind_of([&] { train_student(build_student(toy_backend(), missing, ds), ds, fold, partial, missing); }) ==
        ErrorKind::kMissingTeacherOutput);
}

TEST_CASE("student learns a separable toy set and survives a checkpoint") {
  const auto ds = corpus::toy_dataset(20, 6);
  FakeTeacher text_t(Modality::kText, 3.0, ds);
  const Teacher* teachers[] = {&text_t};
  const auto cache = build_teacher_cache(teachers, ds);
  auto cfg = toy_config();
  cfg.teacher_set = {Modality::kText};
  cfg.epochs = 5;
  emotion::EmbeddingTable emo = [&] {
    std::vector<std::string> keys;
    for (const auto& p : ds.posts) keys.push_back(p.id);
    return emotion::EmbeddingTable(keys, nn::Matrix::Random(20, 7));
  }();
  cfg.fusion = FusionMode::kEmotion;
  const auto trained =
      train_student(build_student(toy_backend(), cfg, ds, {emo, std::nullopt}), ds, all_train(ds), cache, cfg);
  CHECK(evaluate_student(*trained.student, ds, all_train(ds).train).accuracy >= 0.95);

  const auto dir = std::filesystem::temp_directory_path() / "mmkd_student";
  std::filesystem::remove_all(dir);
  trained.student->save(dir, student_manifest_extra(cfg));
  const auto back = Student::load(dir);
  CHECK(back.checksum() == trained.student->checksum());
  CHECK(back.predict_proba(ds.posts[3]) == trained.student->predict_proba(ds.posts[3]));
  const auto manifest = nn::read_checkpoint(dir).manifest;
  CHECK(manifest.at("teacher_set") == nlohmann::json{"text"});
  CHECK(manifest.at("temperature") == 1.0);
  CHECK(manifest.at("lambda_kd") == 1.0);
  CHECK(manifest.contains("seed"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("distill config validation") {
  DistillConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.temperature = 0.0;
  CHECK(kind_of([&] { validate(cfg); }) == ErrorKind::kInvalidConfig);
  cfg.temperature = 1.0;
  cfg.teacher_set.clear();
  CHECK(kind_of([&] { validate(cfg); }) == ErrorKind::kInvalidConfig);
  cfg.teacher_set = {Modality::kText};
  cfg.head.dropout = 0.2;
  CHECK(kind_of([&] { validate(cfg); }) == ErrorKind::kRangeError);
  cfg.head.dropout = 0.05;
  const nlohmann::json j = cfg;
  const auto back = j.get<DistillConfig>();
  CHECK(nlohmann::json(back) == j);
  const auto ds = corpus::toy_dataset(4, 1);
  auto fused = toy_config();
  fused.fusion = FusionMode::kAudio;
  CHECK(kind_of([&] { build_student(toy_backend(), fused, ds); }) == ErrorKind::kMissingModality);
}
