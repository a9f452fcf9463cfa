#include "mmkd/emotion/embedding_table.hpp"

#include <stdexcept>

namespace mmkd::emotion {

EmbeddingTable::EmbeddingTable(std::vector<std::string> keys, nn::Matrix values)
    : keys_(std::move(keys)), values_(std::move(values)) {
  if (static_cast<Eigen::Index>(keys_.size()) != values_.rows()) {
    throw std::invalid_argument("embedding table key/row count mismatch");
  }
  for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i], i);
}

bool EmbeddingTable::contains(std::string_view key) const {
  return index_.contains(std::string(key));
}

nn::RowVector EmbeddingTable::row(std::string_view key) const {
  const auto it = index_.find(std::string(key));
  if (it == index_.end()) throw std::out_of_range("no embedding for '" + std::string(key) + "'");
  return values_.row(static_cast<Eigen::Index>(it->second));
}

}  // namespace mmkd::emotion
