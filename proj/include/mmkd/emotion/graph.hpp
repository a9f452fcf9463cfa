#pragma once

#include "mmkd/corpus/corpus.hpp"
#include "mmkd/nn/autograd.hpp"
#include "mmkd/text/encoder.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace mmkd::emotion {

enum class EdgeKind { kTokenToken, kTokenPost, kPostPost };

std::string_view edge_kind_name(EdgeKind k);

// Node indices: posts occupy [0, P), tokens [P, P + T).
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 0.0;
  EdgeKind kind = EdgeKind::kPostPost;
};

struct TextGraph {
  std::vector<std::string> post_nodes;   // post ids, dataset order
  std::vector<std::string> token_nodes;  // sorted vocabulary
  std::vector<Edge> edges;               // undirected, stored once
  nn::Matrix features;                   // nodes x d, empty until initialized

  std::size_t num_posts() const { return post_nodes.size(); }
  std::size_t num_nodes() const { return post_nodes.size() + token_nodes.size(); }
  std::size_t token_node(std::size_t t) const { return post_nodes.size() + t; }
  // "post:<id>" or "token:<token>".
  std::string node_key(std::size_t node) const;
};

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

// Token-token edges carry positive PMI over sliding windows (a post shorter
// than the window is one window); token-post edges carry count * ln(N/df);
// post-post edges carry the Jaccard index of the posts' token sets.
TextGraph build_graph(const corpus::Dataset& dataset, int window = 20,
                      const Tokenizer& tokenizer = {});

// D^{-1/2} (A + I) D^{-1/2} with A the symmetric weighted adjacency.
std::shared_ptr<const nn::SparseMatrix> normalized_adjacency(const TextGraph& graph);

// Post rows: encoder summary. Token rows: element-wise minimum of the token's
// contextual states over all occurrences (the base embedding if it never
// survives truncation).
nn::Matrix init_node_features(const corpus::Dataset& dataset, const TextGraph& graph,
                              const text::TextEncoder& encoder);

// <dir>/graph.json (nodes, typed edges) and <dir>/features.f32.
void export_graph(const TextGraph& graph, const std::filesystem::path& dir);

}  // namespace mmkd::emotion
