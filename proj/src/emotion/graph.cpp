#include "mmkd/emotion/graph.hpp"

#include "mmkd/error.hpp"
#include "mmkd/nn/checkpoint.hpp"
#include "mmkd/text/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

namespace mmkd::emotion {

std::string_view edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::kTokenToken:
      return "token-token";
    case EdgeKind::kTokenPost:
      return "token-post";
    case EdgeKind::kPostPost:
      return "post-post";
  }
  return "unknown";
}

std::string TextGraph::node_key(std::size_t node) const {
  if (node < post_nodes.size()) return "post:" + post_nodes[node];
  return "token:" + token_nodes.at(node - post_nodes.size());
}

TextGraph build_graph(const corpus::Dataset& dataset, int window, const Tokenizer& tokenizer) {
  if (window < 2) throw Error(ErrorKind::kInvalidConfig, "PMI window must be at least 2");
  if (dataset.posts.empty()) throw Error(ErrorKind::kEmptyDataset, "cannot build a graph of no posts");
  const Tokenizer tok = tokenizer ? tokenizer : Tokenizer(text::tokenize);

  TextGraph g;
  std::vector<std::vector<std::string>> docs;
  std::set<std::string> vocab;
  for (const auto& p : dataset.posts) {
    g.post_nodes.push_back(p.id);
    docs.push_back(tok(p.text));
    vocab.insert(docs.back().begin(), docs.back().end());
  }
  if (vocab.empty()) throw Error(ErrorKind::kEmptyVocabulary, "no tokens in " + dataset.name);
  g.token_nodes.assign(vocab.begin(), vocab.end());
  std::unordered_map<std::string, std::size_t> tid;
  for (std::size_t i = 0; i < g.token_nodes.size(); ++i) tid.emplace(g.token_nodes[i], i);

  // Integer-id documents.
  std::vector<std::vector<std::size_t>> ids(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& t : docs[d]) ids[d].push_back(tid.at(t));
  }

  // PMI over windows.
  std::vector<std::size_t> single(g.token_nodes.size(), 0);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair;
  std::size_t n_windows = 0;
  const auto w = static_cast<std::size_t>(window);
  for (const auto& doc : ids) {
    if (doc.empty()) continue;
    const std::size_t count = doc.size() <= w ? 1 : doc.size() - w + 1;
    for (std::size_t s = 0; s < count; ++s) {
      std::set<std::size_t> in(doc.begin() + static_cast<std::ptrdiff_t>(s),
                               doc.begin() + static_cast<std::ptrdiff_t>(std::min(doc.size(), s + w)));
      ++n_windows;
      for (auto a : in) ++single[a];
      for (auto a = in.begin(); a != in.end(); ++a) {
        for (auto b = std::next(a); b != in.end(); ++b) ++pair[{*a, *b}];
      }
    }
  }
  const double nw = static_cast<double>(n_windows);
  for (const auto& [ab, n_ab] : pair) {
    const double pmi = std::log(static_cast<double>(n_ab) * nw /
                                (static_cast<double>(single[ab.first]) *
                                 static_cast<double>(single[ab.second])));
    if (pmi > 0.0) {
      g.edges.push_back({g.token_node(ab.first), g.token_node(ab.second), pmi, EdgeKind::kTokenToken});
    }
  }

  // TF-IDF.
  std::vector<std::size_t> df(g.token_nodes.size(), 0);
  std::vector<std::set<std::size_t>> sets(ids.size());
  for (std::size_t d = 0; d < ids.size(); ++d) {
    sets[d].insert(ids[d].begin(), ids[d].end());
    for (auto t : sets[d]) ++df[t];
  }
  const double n_docs = static_cast<double>(ids.size());
  for (std::size_t d = 0; d < ids.size(); ++d) {
    std::map<std::size_t, std::size_t> tf;
    for (auto t : ids[d]) ++tf[t];
    for (const auto& [t, count] : tf) {
      const double weight = static_cast<double>(count) * std::log(n_docs / static_cast<double>(df[t]));
      if (weight > 0.0) g.edges.push_back({d, g.token_node(t), weight, EdgeKind::kTokenPost});
    }
  }

  // Jaccard.
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      std::size_t inter = 0;
      for (auto t : sets[i]) inter += sets[j].contains(t) ? 1 : 0;
      const std::size_t uni = sets[i].size() + sets[j].size() - inter;
      if (inter > 0 && uni > 0) {
        g.edges.push_back({i, j, static_cast<double>(inter) / static_cast<double>(uni),
                           EdgeKind::kPostPost});
      }
    }
  }
  return g;
}

std::shared_ptr<const nn::SparseMatrix> normalized_adjacency(const TextGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);
  for (const auto& e : graph.edges) {
    degree[e.src] += e.weight;
    degree[e.dst] += e.weight;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) + 2 * graph.edges.size());
  const auto inv_sqrt = [&](std::size_t i) { return 1.0 / std::sqrt(degree[i]); };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    trips.emplace_back(i, i, inv_sqrt(u) * inv_sqrt(u));
  }
  for (const auto& e : graph.edges) {
    const double v = e.weight * inv_sqrt(e.src) * inv_sqrt(e.dst);
    trips.emplace_back(static_cast<Eigen::Index>(e.src), static_cast<Eigen::Index>(e.dst), v);
    trips.emplace_back(static_cast<Eigen::Index>(e.dst), static_cast<Eigen::Index>(e.src), v);
  }
  auto adj = std::make_shared<nn::SparseMatrix>(n, n);
  adj->setFromTriplets(trips.begin(), trips.end());
  return adj;
}

nn::Matrix init_node_features(const corpus::Dataset& dataset, const TextGraph& graph,
                              const text::TextEncoder& encoder) {
  const Eigen::Index d = encoder.spec().width;
  nn::Matrix features(static_cast<Eigen::Index>(graph.num_nodes()), d);
  std::unordered_map<std::string, std::size_t> tid;
  for (std::size_t i = 0; i < graph.token_nodes.size(); ++i) tid.emplace(graph.token_nodes[i], i);
  std::vector<bool> seen(graph.token_nodes.size(), false);

  for (std::size_t p = 0; p < graph.post_nodes.size(); ++p) {
    const auto& post = dataset.post(graph.post_nodes[p]);
    const auto tokens = encoder.tokens_of(post.text);
    const auto enc = encoder.encode_tokens(tokens);
    features.row(static_cast<Eigen::Index>(p)) = enc.summary.value();
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      const auto it = tid.find(tokens[k]);
      if (it == tid.end()) continue;
      const auto row = static_cast<Eigen::Index>(graph.token_node(it->second));
      const auto state = enc.tokens.value().row(static_cast<Eigen::Index>(k));
      if (seen[it->second]) {
        features.row(row) = features.row(row).cwiseMin(state);
      } else {
        features.row(row) = state;
        seen[it->second] = true;
      }
    }
  }
  for (std::size_t t = 0; t < seen.size(); ++t) {
    if (!seen[t]) {
      features.row(static_cast<Eigen::Index>(graph.token_node(t))) =
          encoder.base_embedding(graph.token_nodes[t]);
    }
  }
  return features;
}

void export_graph(const TextGraph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"weight", e.weight},
                     {"kind", edge_kind_name(e.kind)}});
  }
  const nlohmann::json doc = {
      {"post_nodes", graph.post_nodes},
      {"token_nodes", graph.token_nodes},
      {"edges", edges},
      {"features",
       {{"file", "features.f32"},
        {"rows", graph.features.rows()},
        {"cols", graph.features.cols()},
        {"layout", "u32 rows, u32 cols, float32 row-major, little-endian"}}}};
  std::ofstream out(dir / "graph.json");
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + (dir / "graph.json").string());
  out << doc.dump(2) << '\n';
  nn::write_f32_matrix(dir / "features.f32", graph.features);
}

}  // namespace mmkd::emotion
