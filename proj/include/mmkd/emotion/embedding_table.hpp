#pragma once

#include "mmkd/nn/autograd.hpp"

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmkd::emotion {

// Row-per-key embedding store.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> keys, nn::Matrix values);

  bool contains(std::string_view key) const;
  // Throws std::out_of_range for unknown keys.
  nn::RowVector row(std::string_view key) const;
  std::size_t size() const { return keys_.size(); }
  Eigen::Index width() const { return values_.cols(); }
  const std::vector<std::string>& keys() const { return keys_; }
  const nn::Matrix& values() const { return values_; }

 private:
  std::vector<std::string> keys_;
  nn::Matrix values_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mmkd::emotion
