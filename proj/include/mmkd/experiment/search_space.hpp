#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mmkd::experiment {

// One hyperparameter and its discrete choice set (integer ranges are
// expanded into their members).
struct ParamDomain {
  std::string name;
  std::vector<nlohmann::json> choices;

  bool contains(const nlohmann::json& value) const;
};

struct SearchSpace {
  std::string block;
  std::vector<ParamDomain> params;

  const ParamDomain* find(std::string_view name) const;
  // True when every parameter of the space is present in `assignment` with
  // an admissible value.
  bool contains(const nlohmann::json& assignment) const;
  std::size_t cardinality() const;
};

SearchSpace text_teacher_space();
SearchSpace emotion_teacher_space();
SearchSpace audio_teacher_space();
SearchSpace student_space();
// "text", "emotion", "audio" or "student".
SearchSpace space_by_name(std::string_view block);

// Throws RangeError for the first field of `assignment` that the space
// declares but whose value lies outside it. Fields the space does not
// declare are ignored.
void require_in_space(const SearchSpace& space, const nlohmann::json& assignment);

}  // namespace mmkd::experiment
