#include "mmkd/experiment/search_space.hpp"

#include "mmkd/error.hpp"

#include <cmath>

namespace mmkd::experiment {

namespace {

using nlohmann::json;

ParamDomain range(std::string name, int lo, int hi) {
  ParamDomain d{std::move(name), {}};
  for (int v = lo; v <= hi; ++v) d.choices.emplace_back(v);
  return d;
}

ParamDomain reals(std::string name, std::initializer_list<double> values) {
  ParamDomain d{std::move(name), {}};
  for (double v : values) d.choices.emplace_back(v);
  return d;
}

ParamDomain ints(std::string name, std::initializer_list<int> values) {
  ParamDomain d{std::move(name), {}};
  for (int v : values) d.choices.emplace_back(v);
  return d;
}

ParamDomain strings(std::string name, std::initializer_list<const char*> values) {
  ParamDomain d{std::move(name), {}};
  for (const char* v : values) d.choices.emplace_back(v);
  return d;
}

bool same_value(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)});
  }
  return a == b;
}

}  // namespace

bool ParamDomain::contains(const json& value) const {
  for (const auto& c : choices) {
    if (same_value(c, value)) return true;
  }
  return false;
}

const ParamDomain* SearchSpace::find(std::string_view name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool SearchSpace::contains(const json& assignment) const {
  for (const auto& p : params) {
    if (!assignment.contains(p.name) || !p.contains(assignment.at(p.name))) return false;
  }
  return true;
}

std::size_t SearchSpace::cardinality() const {
  std::size_t n = 1;
  for (const auto& p : params) n *= p.choices.size();
  return n;
}

SearchSpace text_teacher_space() {
  return {"text",
          {reals("dropout", {0.01, 0.05, 0.1, 0.5}),
           ints("layers", {2, 4, 6, 8, 10, 12}),
           ints("heads", {2, 4, 6, 8, 12}),
           reals("lr", {1e-4, 1e-5, 2e-5, 3e-5, 4e-5, 5e-5}),
           reals("weight_decay", {0.0, 0.01, 0.1}),
           range("epochs", 2, 5)}};
}

SearchSpace emotion_teacher_space() {
  return {"emotion",
          {reals("dropout", {0.01, 0.05, 0.1, 0.5}),
           range("hidden_layers", 2, 5),
           ints("hidden_dim", {100, 200, 300, 400, 500}),
           reals("lr", {1e-3, 1e-4, 1e-5}),
           reals("weight_decay", {0.0, 0.01, 0.1})}};
}

SearchSpace audio_teacher_space() {
  return {"audio",
          {reals("dropout", {0.01, 0.05, 0.1, 0.5}),
           ints("layers", {2, 4, 6, 8, 10, 12}),
           ints("heads", {2, 4, 6, 8, 12}),
           reals("lr", {1e-3, 1e-4, 1e-5, 5e-5}),
           range("patience", 2, 5),
           reals("factor", {0.1, 0.5})}};
}

SearchSpace student_space() {
  return {"student",
          {reals("dropout", {0.01, 0.05, 0.1, 0.5}),
           reals("lr", {1e-4, 1e-5, 2e-5, 3e-5, 4e-5, 5e-5}),
           reals("weight_decay", {0.0, 0.01, 0.1}),
           ints("layers", {2, 4, 6, 8, 10, 12}),
           ints("heads", {2, 4, 6, 8, 12}),
           strings("activation", {"relu", "gelu"}),
           range("epochs", 3, 5)}};
}

SearchSpace space_by_name(std::string_view block) {
  if (block == "text") return text_teacher_space();
  if (block == "emotion") return emotion_teacher_space();
  if (block == "audio") return audio_teacher_space();
  if (block == "student") return student_space();
  throw Error(ErrorKind::kInvalidConfig, "unknown search space '" + std::string(block) + "'");
}

void require_in_space(const SearchSpace& space, const json& assignment) {
  for (const auto& p : space.params) {
    if (!assignment.contains(p.name)) continue;
    if (!p.contains(assignment.at(p.name))) {
      throw Error(ErrorKind::kRangeError, space.block + "." + p.name + " = " +
                                              assignment.at(p.name).dump() +
                                              " is outside the search space");
    }
  }
}

}  // namespace mmkd::experiment
