#include <doctest.h>

#include "gradcheck.hpp"
#include "mmkd/corpus/fixtures.hpp"
#include "mmkd/emotion/emotion_teacher.hpp"
#include "mmkd/error.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/text/tokenizer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace mmkd;
using namespace mmkd::emotion;

namespace {

corpus::Dataset corpus_of(const std::vector<std::string>& texts) {
  std::vector<std::pair<std::string, std::string>> records;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    records.emplace_back("d" + std::to_string(i), texts[i]);
    labels.push_back(i % 2);
  }
  return corpus::make_dataset("g", {"x", "y"}, records, labels, corpus::KFold{2});
}

using EdgeMap = std::map<std::tuple<int, std::string, std::string>, double>;

// Edges keyed by (kind, endpoint name, endpoint name) with names ordered.
EdgeMap edges_by_name(const TextGraph& g) {
  EdgeMap out;
  const auto name = [&](std::size_t n) {
    return n < g.num_posts() ? "P" + g.post_nodes[n] : "T" + g.token_nodes[n - g.num_posts()];
  };
  for (const auto& e : g.edges) {
    auto a = name(e.src), b = name(e.dst);
    if (b < a) std::swap(a, b);
    out[{static_cast<int>(e.kind), a, b}] = e.weight;
  }
  return out;
}

// Independent enumeration of every window, count and set.
EdgeMap oracle_edges(const std::vector<std::string>& texts, std::size_t window) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& t : texts) docs.push_back(text::tokenize(t));
  std::vector<std::vector<std::string>> windows;
  for (const auto& d : docs) {
    if (d.empty()) continue;
    if (d.size() <= window) {
      windows.push_back(d);
      continue;
    }
    for (std::size_t s = 0; s + window <= d.size(); ++s) {
      windows.emplace_back(d.begin() + static_cast<long>(s), d.begin() + static_cast<long>(s + window));
    }
  }
  std::set<std::string> vocab;
  for (const auto& d : docs) vocab.insert(d.begin(), d.end());
  const auto in = [](const std::vector<std::string>& w, const std::string& t) {
    return std::find(w.begin(), w.end(), t) != w.end();
  };
  EdgeMap out;
  const double nw = static_cast<double>(windows.size());
  for (const auto& a : vocab) {
    for (const auto& b : vocab) {
      if (!(a < b)) continue;
      double na = 0, nb = 0, nab = 0;
      for (const auto& w : windows) {
        na += in(w, a);
        nb += in(w, b);
        nab += in(w, a) && in(w, b);
      }
      if (nab == 0) continue;
      const double pmi = std::log((nab / nw) / ((na / nw) * (nb / nw)));
      if (pmi > 0) out[{0, "T" + a, "T" + b}] = pmi;
    }
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& t : vocab) {
      const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), t));
      double df = 0;
      for (const auto& o : docs) df += in(o, t);
      const double w = tf * std::log(static_cast<double>(docs.size()) / df);
      if (w > 0) out[{1, "Pd" + std::to_string(d), "T" + t}] = w;
    }
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      std::set<std::string> a(docs[i].begin(), docs[i].end()), b(docs[j].begin(), docs[j].end());
      std::set<std::string> uni = a;
      uni.insert(b.begin(), b.end());
      double inter = 0;
      for (const auto& t : a) inter += b.count(t);
      if (inter > 0) {
        auto x = "Pd" + std::to_string(i), y = "Pd" + std::to_string(j);
        if (y < x) std::swap(x, y);
        out[{2, x, y}] = inter / static_cast<double>(uni.size());
      }
    }
  }
  return out;
}

EmotionLabelSet bits(std::initializer_list<const char*> names) {
  EmotionLabelSet s;
  for (auto n : names) s.set(emotion_index(n));
  return s;
}

}  // namespace

TEST_CASE("assign_emotions unions matched lexicon entries") {
  EmotionLexicon lex;
  lex.add("cry", bits({"sadness", "negative"}));
  lex.add("alone", bits({"sadness"}));
  CHECK(assign_emotions("i cry alone", lex) == bits({"sadness", "negative"}));
  CHECK(assign_emotions("sunny picnic", lex).none());
  CHECK(assign_emotions("CRY cry", lex) == bits({"sadness", "negative"}));
  CHECK(assign_emotions("alone i cry cry", lex) == assign_emotions("i cry alone", lex));
  CHECK(toy_lexicon().size() >= 6);
}

TEST_CASE("lexicon files round-trip") {
  const auto path = std::filesystem::temp_directory_path() / "mmkd_lexicon.tsv";
  toy_lexicon().save(path);
  const auto back = EmotionLexicon::load(path);
  CHECK(back.entries() == toy_lexicon().entries());
  std::ofstream(path) << "# comment\nbad line\n";
  CHECK_THROWS_AS(EmotionLexicon::load(path), Error);
  std::ofstream(path) << "sad\tgloom\n";
  CHECK_THROWS_AS(EmotionLexicon::load(path), Error);
}

TEST_CASE("emotion label distribution covers every post") {
  const auto ds = corpus::toy_dataset(40, 2);
  const auto labels = assign_emotions(ds, toy_lexicon());
  const auto dist = emotion_label_distribution(labels);
  CHECK(std::accumulate(dist.begin(), dist.end(), std::size_t{0}) == 40);
}

TEST_CASE("graph weights match the worked values") {
  const auto g = build_graph(corpus_of({"a b", "a b", "c d"}), 2);
  const auto e = edges_by_name(g);
  CHECK(e.at({0, "Ta", "Tb"}) == doctest::Approx(std::log(1.5)).epsilon(1e-12));
  CHECK(e.at({0, "Tc", "Td"}) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK_FALSE(e.contains({0, "Ta", "Tc"}));

  const auto h = build_graph(corpus_of({"a b", "a c"}), 2);
  const auto f = edges_by_name(h);
  CHECK(f.at({2, "Pd0", "Pd1"}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(f.at({1, "Pd0", "Tb"}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_FALSE(f.contains({1, "Pd0", "Ta"}));
}

TEST_CASE("graph edges equal brute-force enumeration") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", ":(", "sad"};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n_docs = 2 + rng() % 9;
    std::vector<std::string> texts;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::string t;
      const std::size_t len = 1 + rng() % 8;
      for (std::size_t k = 0; k < len; ++k) t += words[rng() % words.size()] + " ";
      texts.push_back(t);
    }
    const std::size_t window = 2 + rng() % 4;
    const auto got = edges_by_name(build_graph(corpus_of(texts), static_cast<int>(window)));
    const auto want = oracle_edges(texts, window);
    REQUIRE(got.size() == want.size());
    for (const auto& [key, w] : want) {
      REQUIRE(got.contains(key));
      CHECK(std::abs(got.at(key) - w) < 1e-9);
    }
    for (const auto& [key, w] : got) {
      CHECK(w > 0.0);
      if (std::get<0>(key) == 2) CHECK(w <= 1.0);
      CHECK(std::get<1>(key) != std::get<2>(key));
    }
  }
}

TEST_CASE("graph construction rejects degenerate input") {
  CHECK_THROWS_AS(build_graph(corpus_of({"a b"}), 1), Error);
  try {
    build_graph(corpus_of({"a", "b"}), 2, [](std::string_view) { return std::vector<std::string>{}; });
    FAIL("expected EmptyVocabulary");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyVocabulary);
  }
}

TEST_CASE("node features use summaries and element-wise token minima") {
  const auto ds = corpus_of({"sad cry", "cry again", "fine"});
  const auto g = build_graph(ds, 20);
  const text::TextEncoder enc(text::resolve_backend("toy-deterministic"), g.token_nodes);
  const auto x = init_node_features(ds, g, enc);
  CHECK(x.rows() == static_cast<Eigen::Index>(g.num_nodes()));
  CHECK(x.row(0) == enc.encode("sad cry").summary.value());

  const auto tok = [&](const std::string& t) {
    const auto it = std::find(g.token_nodes.begin(), g.token_nodes.end(), t);
    return static_cast<Eigen::Index>(g.token_node(static_cast<std::size_t>(it - g.token_nodes.begin())));
  };
  CHECK(x.row(tok("sad")) == enc.encode("sad cry").tokens.value().row(0));
  const nn::RowVector a = enc.encode("sad cry").tokens.value().row(1);
  const nn::RowVector b = enc.encode("cry again").tokens.value().row(0);
  CHECK(x.row(tok("cry")) == a.cwiseMin(b));
  CHECK(init_node_features(ds, g, enc) == x);
}

TEST_CASE("self-loop-only GCN equals a per-node MLP") {
  TextGraph g;
  g.post_nodes = {"p0", "p1", "p2"};
  g.token_nodes = {"t0", "t1"};
  std::mt19937_64 rng(3);
  g.features = nn::gaussian(5, 8, 1.0, rng);
  const GcnModel model(8, 4, normalized_adjacency(g), 9);
  const nn::Matrix z = model.forward(nn::Var::constant(g.features), {}).value();
  CHECK(z.rows() == 5);
  CHECK(z.cols() == 7);
  const nn::Matrix& w1 = model.layer1().weight().value();
  const nn::Matrix& w2 = model.layer2().weight().value();
  for (Eigen::Index i = 0; i < 5; ++i) {
    nn::RowVector h = g.features.row(i) * w1 + model.layer1().bias().value();
    h = h.cwiseMax(0.0);
    const nn::RowVector want = h * w2 + model.layer2().bias().value();
    CHECK((z.row(i) - want).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("GCN loss gradients match finite differences") {
  const auto ds = corpus_of({"sad cry", "cry", "fun"});
  auto g = build_graph(ds, 20);
  REQUIRE(g.num_nodes() <= 6);
  std::mt19937_64 rng(5);
  g.features = nn::gaussian(static_cast<Eigen::Index>(g.num_nodes()), 6, 1.0, rng);
  const GcnModel model(6, 4, normalized_adjacency(g), 2);
  const auto labels = assign_emotions(ds, toy_lexicon());
  const nn::Matrix y = label_matrix(labels);
  nn::ParameterList params;
  model.collect(params);
  const auto r = testing::gradcheck(
      [&] { return model.loss(nn::Var::constant(g.features), y, {}); }, params);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("GCN training is deterministic and embeddings cover all nodes") {
  const auto ds = corpus::toy_dataset(20, 1);
  auto g = build_graph(ds, 20);
  const text::TextEncoder enc(text::resolve_backend("toy-deterministic"), g.token_nodes);
  g.features = init_node_features(ds, g, enc);
  const auto labels = assign_emotions(ds, toy_lexicon());
  GcnConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 30;
  cfg.seed = 4;
  const auto a = train_emotion_gcn(g, labels, cfg);
  const auto b = train_emotion_gcn(g, labels, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].train_loss == b.log[i].train_loss);
  CHECK(a.log.back().train_loss < a.log.front().train_loss);
  CHECK(a.model.forward(nn::Var::constant(g.features), {}).rows() ==
        static_cast<Eigen::Index>(g.num_nodes()));

  const auto table = extract_emotion_embeddings(a.model, g);
  CHECK(table.size() == g.num_nodes());
  CHECK(table.width() == 7);
  CHECK(extract_emotion_embeddings(a.model, g).values() == table.values());
  CHECK(post_embeddings(table, g).row(ds.posts[3].id) == table.row("post:" + ds.posts[3].id));
}

TEST_CASE("encoder refinement is deterministic and does not lose training F1") {
  const auto ds = corpus::toy_dataset(20, 6);
  EmotionPipelineConfig cfg;
  cfg.gcn.hidden = 8;
  cfg.gcn.epochs = 40;
  cfg.refine.epochs = 4;
  cfg.refine.lr = 1e-2;
  CHECK(emotion_projector(24, 3) == emotion_projector(24, 3));
  const auto f = prepare_emotion_features(ds, toy_lexicon(), text::resolve_backend("toy-deterministic"),
                                          cfg);
  CHECK(f.post_embeddings.size() == ds.posts.size());
  CHECK(f.post_embeddings.width() == 24);
  CHECK(f.refine_f1_after >= f.refine_f1_before);
  const auto again = prepare_emotion_features(ds, toy_lexicon(),
                                              text::resolve_backend("toy-deterministic"), cfg);
  CHECK(again.post_embeddings.values() == f.post_embeddings.values());

  cfg.refine_with_encoder = false;
  const auto raw = prepare_emotion_features(ds, toy_lexicon(), text::resolve_backend("toy-deterministic"),
                                            cfg);
  CHECK(raw.post_embeddings.width() == 7);
}

TEST_CASE("emotion teacher separates toy embeddings and round-trips") {
  const auto ds = corpus::toy_dataset(20, 8);
  std::vector<std::string> keys;
  nn::Matrix values(20, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t i = 0; i < 20; ++i) {
    keys.push_back(ds.posts[i].id);
    const double sign = ds.posts[i].label == 0 ? 1.0 : -1.0;
    for (Eigen::Index c = 0; c < 4; ++c) values(static_cast<Eigen::Index>(i), c) = sign + noise(rng);
  }
  corpus::Fold fold;
  for (const auto& p : ds.posts) fold.train.push_back(p.id);
  EmotionTeacherConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_dim = 400;
  cfg.epochs = 100;
  cfg.seed = 2;
  const auto trained = train_emotion_teacher(EmbeddingTable(keys, values), ds, fold, cfg);
  CHECK(evaluate_teacher(*trained.teacher, ds, fold.train).accuracy == 1.0);
  for (const auto& p : ds.posts) {
    const auto pr = trained.teacher->predict_proba(p);
    CHECK(std::accumulate(pr.begin(), pr.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  const auto dir = std::filesystem::temp_directory_path() / "mmkd_emotion_teacher";
  std::filesystem::remove_all(dir);
  trained.teacher->save(dir);
  const auto back = EmotionTeacher::load(dir);
  CHECK(back.checksum() == trained.teacher->checksum());
  CHECK(back.predict_proba(ds.posts[0]) == trained.teacher->predict_proba(ds.posts[0]));
  std::filesystem::remove_all(dir);

  corpus::Post stranger;
  stranger.id = "unknown";
  CHECK_THROWS_AS(trained.teacher->predict_proba(stranger), Error);

  cfg.hidden_dim = 450;
  CHECK_THROWS_AS(train_emotion_teacher(EmbeddingTable(keys, values), ds, fold, cfg), Error);
}

TEST_CASE("graph export writes nodes, edges and a float32 feature blob") {
  const auto ds = corpus_of({"a b", "a c"});
  auto g = build_graph(ds, 2);
  g.features = nn::Matrix::Constant(static_cast<Eigen::Index>(g.num_nodes()), 3, 0.25);
  const auto dir = std::filesystem::temp_directory_path() / "mmkd_graph_export";
  std::filesystem::remove_all(dir);
  export_graph(g, dir);
  std::ifstream in(dir / "graph.json");
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc.at("edges").size() == g.edges.size());
  CHECK(nn::read_f32_matrix(dir / "features.f32") == g.features);
  CHECK(std::filesystem::file_size(dir / "features.f32") == 8 + 4 * g.features.size());
  std::filesystem::remove_all(dir);
}
