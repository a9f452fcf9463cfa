#include "mmkd/text/encoder.hpp"

#include "mmkd/error.hpp"
#include "mmkd/text/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace mmkd::text {

namespace {

constexpr double kNeighbourWeight = 0.25;
constexpr double kPositionWeight = 0.1;
constexpr const char* kEmptyToken = "[EMPTY]";

struct Registered {
  const char* id;
  Eigen::Index width;
  std::uint64_t seed;
};

constexpr Registered kBackends[] = {
    {"toy-deterministic", 24, 0x5eed},
    {"bert-base-uncased", 768, 0xbe27},
    {"roberta-base", 768, 0x20be27a},
    {"mental-bert", 768, 0x3e27a1},
    {"clinical-bert", 768, 0xc11c},
};

nn::Matrix positions(Eigen::Index n, Eigen::Index d) {
  nn::Matrix p(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      p(pos, i) = (i % 2 == 0) ? std::sin(static_cast<double>(pos) * rate)
                               : std::cos(static_cast<double>(pos) * rate);
    }
  }
  return p;
}

}  // namespace

std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

EncoderSpec resolve_backend(std::string_view id) {
  for (const auto& b : kBackends) {
    if (id == b.id) return EncoderSpec{b.id, b.width, 256, b.seed};
  }
  throw Error(ErrorKind::kBackendFailure, "unknown text encoder backend '" + std::string(id) + "'");
}

std::vector<std::string> known_backends() {
  std::vector<std::string> out;
  for (const auto& b : kBackends) out.emplace_back(b.id);
  return out;
}

std::vector<std::string> build_vocabulary(const std::vector<std::string>& texts) {
  std::set<std::string> vocab;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) vocab.insert(std::move(tok));
  }
  return {vocab.begin(), vocab.end()};
}

TextEncoder::TextEncoder(EncoderSpec spec, const std::vector<std::string>& vocabulary)
    : spec_(std::move(spec)), vocabulary_(vocabulary) {
  if (spec_.width <= 0) throw Error(ErrorKind::kBackendFailure, "encoder width must be positive");
  nn::Matrix table(static_cast<Eigen::Index>(vocabulary_.size()), spec_.width);
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    index_.emplace(vocabulary_[i], i);
    table.row(static_cast<Eigen::Index>(i)) = base_embedding(vocabulary_[i]);
  }
  table_ = nn::Var::parameter(std::move(table));
}

nn::RowVector TextEncoder::base_embedding(std::string_view token) const {
  std::mt19937_64 rng(spec_.seed ^ stable_hash(token));
  std::normal_distribution<double> dist(0.0, 1.0);
  nn::RowVector v(spec_.width);
  for (Eigen::Index i = 0; i < spec_.width; ++i) v(i) = dist(rng);
  return v;
}

void TextEncoder::set_token_row(std::string_view token, const nn::RowVector& row) {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) throw std::out_of_range("token not in encoder vocabulary");
  table_.mutable_value().row(static_cast<Eigen::Index>(it->second)) = row;
}

bool TextEncoder::has_token(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::vector<std::string> TextEncoder::tokens_of(std::string_view text) const {
  auto tokens = tokenize(text);
  if (tokens.size() > spec_.max_length) tokens.resize(spec_.max_length);
  return tokens;
}

Encoded TextEncoder::encode(std::string_view text) const { return encode_tokens(tokens_of(text)); }

Encoded TextEncoder::encode_tokens(std::vector<std::string> tokens) const {
  if (tokens.size() > spec_.max_length) tokens.resize(spec_.max_length);
  if (tokens.empty()) tokens.emplace_back(kEmptyToken);
  const auto n = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index d = spec_.width;

  std::vector<std::size_t> known_rows;
  std::vector<Eigen::Index> known_pos;
  nn::Matrix fixed = nn::Matrix::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = index_.find(tokens[static_cast<std::size_t>(i)]);
    if (it != index_.end()) {
      known_rows.push_back(it->second);
      known_pos.push_back(i);
    } else {
      fixed.row(i) = base_embedding(tokens[static_cast<std::size_t>(i)]);
    }
  }

  nn::Matrix mix = nn::Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    mix(i, i + 1) = kNeighbourWeight;
    mix(i + 1, i) = kNeighbourWeight;
  }

  nn::Var embeddings = nn::Var::constant(fixed);
  if (!known_rows.empty()) {
    nn::Matrix scatter = nn::Matrix::Zero(n, static_cast<Eigen::Index>(known_rows.size()));
    for (std::size_t k = 0; k < known_pos.size(); ++k) {
      scatter(known_pos[k], static_cast<Eigen::Index>(k)) = 1.0;
    }
    embeddings = nn::add(embeddings, nn::matmul(nn::Var::constant(std::move(scatter)),
                                                nn::gather_rows(table_, known_rows)));
  }
  nn::Var states = nn::add(nn::matmul(nn::Var::constant(std::move(mix)), embeddings),
                           nn::Var::constant(kPositionWeight * positions(n, d)));
  return {nn::mean_rows(states), states};
}

void TextEncoder::collect(nn::ParameterList& out) const {
  if (table_.defined() && table_.rows() > 0) out.push_back(table_);
}

void to_json(nlohmann::json& j, const EncoderSpec& s) {
  j = {{"name", s.name}, {"width", s.width}, {"max_length", s.max_length}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, EncoderSpec& s) {
  s.name = j.at("name").get<std::string>();
  s.width = j.at("width").get<Eigen::Index>();
  s.max_length = j.at("max_length").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace mmkd::text
