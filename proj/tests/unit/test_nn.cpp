#include <doctest.h>

#include "gradcheck.hpp"
#include "mmkd/error.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/nn/layers.hpp"
#include "mmkd/nn/optim.hpp"
#include "mmkd/nn/trainer.hpp"

#include <filesystem>

using namespace mmkd;
using mmkd::testing::gradcheck;
using nn::Matrix;
using nn::Var;

namespace {

Var random_param(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Var::parameter(nn::gaussian(r, c, 1.0, rng));
}

}  // namespace

TEST_CASE("elementwise and matrix ops pass finite-difference checks") {
  Var a = random_param(3, 4, 1);
  Var b = random_param(4, 2, 2);
  Var c = random_param(3, 4, 3);
  Var row = random_param(1, 4, 4);

  const auto check = [](const std::function<Var()>& f, std::vector<Var> ps) {
    const auto r = gradcheck(f, std::move(ps));
    CHECK(r.max_rel_error < 1e-5);
  };
  check([&] { return nn::sum(nn::matmul(a, b)); }, {a, b});
  check([&] { return nn::mean(nn::mul(nn::add(a, c), nn::sub(a, c))); }, {a, c});
  check([&] { return nn::sum(nn::mul(nn::add_row(a, row), c)); }, {a, row, c});
  check([&] { return nn::sum(nn::mul(nn::gelu(a), c)); }, {a});
  check([&] { return nn::sum(nn::mul(nn::sigmoid(a), c)); }, {a});
  check([&] { return nn::sum(nn::mul(nn::relu(a), c)); }, {a});
  check([&] { return nn::sum(nn::mul(nn::clamp_min(a, 0.1), c)); }, {a});
  check([&] { return nn::sum(nn::mul(nn::softmax_rows(a), c)); }, {a});
  check([&] { return nn::sum(nn::mul(nn::log_softmax_rows(a), c)); }, {a});
  check([&] { return nn::sum(nn::mul(nn::transpose(nn::transpose(a)), c)); }, {a});
  check([&] { return nn::sum(nn::mean_rows(nn::mul(a, c))); }, {a});

  Var gain = random_param(1, 4, 5);
  Var bias = random_param(1, 4, 6);
  check([&] { return nn::sum(nn::mul(nn::layer_norm_rows(a, gain, bias), c)); },
        {a, gain, bias});

  const Var parts[] = {a, c};
  check([&] { return nn::sum(nn::mul(nn::concat_rows(parts), nn::concat_rows(parts))); }, {a, c});
  check([&] { return nn::sum(nn::mul(nn::concat_cols(parts), nn::concat_cols(parts))); }, {a, c});
  check([&] { return nn::sum(nn::mul(nn::slice_cols(a, 1, 2), nn::slice_rows(nn::slice_cols(c, 0, 2), 0, 3))); },
        {a, c});
  const std::size_t rows[] = {2, 0, 2};
  check([&] { return nn::sum(nn::mul(nn::gather_rows(a, rows), c)); }, {a});

  Matrix targets(3, 4);
  targets << 1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 0, 0;
  check([&] { return nn::bce_with_logits(a, targets); }, {a});

  auto sparse = std::make_shared<nn::SparseMatrix>(3, 3);
  sparse->insert(0, 0) = 1.0;
  sparse->insert(1, 2) = 0.5;
  sparse->insert(2, 1) = -2.0;
  check([&] { return nn::sum(nn::mul(nn::spmm(sparse, a), c)); }, {a});
}

TEST_CASE("bce_with_logits matches the direct formula") {
  Matrix z(1, 2);
  z << 0.3, -1.2;
  Matrix y(1, 2);
  y << 1.0, 0.0;
  const double expected =
      0.5 * (-std::log(1.0 / (1.0 + std::exp(-0.3))) - std::log(1.0 - 1.0 / (1.0 + std::exp(1.2))));
  CHECK(nn::bce_with_logits(Var::constant(z), y).scalar() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("transformer encoder gradients match finite differences") {
  std::mt19937_64 rng(11);
  nn::TransformerConfig cfg;
  cfg.width = 4;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  cfg.activation = nn::Activation::kGelu;
  nn::TransformerEncoder enc(cfg, rng);
  nn::ParameterList params;
  enc.collect(params);
  const Var x = Var::constant(nn::gaussian(3, 4, 1.0, rng));
  const Var w = Var::constant(nn::gaussian(3, 4, 1.0, rng));
  const auto r = gradcheck([&] { return nn::sum(nn::mul(enc.forward(x, {}), w)); }, params);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("attention rejects widths not divisible by heads") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(nn::MultiHeadSelfAttention(10, 3, 0.0, rng), std::invalid_argument);
}

TEST_CASE("dropout is the identity outside training") {
  Var a = random_param(2, 3, 9);
  std::mt19937_64 rng(1);
  CHECK(nn::dropout(a, 0.5, {false, &rng}).value() == a.value());
  const Var d = nn::dropout(a, 0.5, {true, &rng});
  for (Eigen::Index i = 0; i < d.value().size(); ++i) {
    const double v = d.value().data()[i];
    CHECK((v == 0.0 || v == doctest::Approx(2.0 * a.value().data()[i])));
  }
}

TEST_CASE("adam minimizes a quadratic") {
  Var w = Var::parameter(Matrix::Constant(1, 2, 5.0));
  nn::Adam opt({w}, 0.1);
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    nn::sum(nn::mul(w, w)).backward();
    opt.step();
  }
  CHECK(w.value().norm() < 1e-2);
}

TEST_CASE("plateau schedule reduces the learning rate after patience epochs") {
  Var w = Var::parameter(Matrix::Zero(1, 1));
  nn::Adam opt({w}, 1.0);
  nn::ReduceLrOnPlateau plateau(2, 0.5);
  CHECK_FALSE(plateau.observe(1.0, opt));
  CHECK_FALSE(plateau.observe(1.0, opt));
  CHECK_FALSE(plateau.observe(1.0, opt));
  CHECK(plateau.observe(1.0, opt));
  CHECK(opt.lr() == doctest::Approx(0.5));
}

TEST_CASE("early stopping triggers after patience epochs without improvement") {
  nn::EarlyStopping stop(2);
  CHECK(stop.observe(0.5));
  CHECK_FALSE(stop.observe(0.4));
  CHECK_FALSE(stop.should_stop());
  CHECK_FALSE(stop.observe(0.5));
  CHECK(stop.should_stop());
}

TEST_CASE("training loop is deterministic and restores the best epoch") {
  const auto run = [] {
    std::mt19937_64 rng(3);
    nn::Linear layer(2, 2, rng);
    nn::ParameterList params;
    layer.collect(params);
    Matrix x(4, 2);
    x << 1, 0, 0, 1, 1, 1, -1, 0;
    const std::size_t labels[] = {0, 1, 0, 1};
    nn::TrainLoopConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 2;
    cfg.lr = 0.05;
    cfg.seed = 9;
    const auto loss = [&](std::span<const std::size_t> batch, const nn::ForwardMode&) {
      Var total;
      for (auto i : batch) {
        const Var lp = nn::log_softmax_rows(
            layer.forward(Var::constant(x.row(static_cast<Eigen::Index>(i)))));
        const Var nll = nn::scale(nn::pick(lp, 0, static_cast<Eigen::Index>(labels[i])), -1.0);
        total = total.defined() ? nn::add(total, nll) : nll;
      }
      return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
    };
    const auto logs = nn::run_training(params, cfg, 4, loss, nullptr);
    return std::make_pair(nn::checksum(params), logs.back().train_loss);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("non-finite loss aborts training") {
  Var w = Var::parameter(Matrix::Ones(1, 1));
  nn::TrainLoopConfig cfg;
  cfg.epochs = 1;
  const auto loss = [&](std::span<const std::size_t>, const nn::ForwardMode&) {
    return nn::scale(nn::sum(w), std::numeric_limits<double>::infinity());
  };
  try {
    nn::run_training({w}, cfg, 1, loss, nullptr);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNonFiniteLoss);
  }
}

TEST_CASE("checkpoints round-trip parameters and checksum") {
  std::mt19937_64 rng(5);
  nn::Linear a(3, 2, rng);
  nn::Linear b(3, 2, rng);
  nn::ParameterList pa, pb;
  a.collect(pa);
  b.collect(pb);
  const auto dir = std::filesystem::temp_directory_path() / "mmkd_ckpt_test";
  std::filesystem::remove_all(dir);
  nn::write_checkpoint(dir, {{"kind", "linear"}}, pa);
  const auto ckpt = nn::read_checkpoint(dir);
  nn::restore(pb, ckpt.params);
  CHECK(nn::checksum(pa) == nn::checksum(pb));
  CHECK(ckpt.manifest.at("checksum") == nn::checksum(pa));
  std::filesystem::remove_all(dir);
}
