#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mmkd::text {

// Shared word-level tokenizer. Lower-cases ASCII letters, splits
// punctuation into single tokens, and keeps emoticons (":)", ":'(", "<3"),
// emoji code points, the "..." hesitation cue and the de-identification
// placeholders (_USER_, _URL_) as atomic tokens.
std::vector<std::string> tokenize(std::string_view text);

bool is_emoticon(std::string_view token);

}  // namespace mmkd::text
