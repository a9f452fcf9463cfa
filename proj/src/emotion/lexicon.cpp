#include "mmkd/emotion/lexicon.hpp"

#include "mmkd/error.hpp"
#include "mmkd/text/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mmkd::emotion {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

EmotionLabelSet set_of(std::initializer_list<std::string_view> names) {
  EmotionLabelSet s;
  for (auto n : names) s.set(emotion_index(n));
  return s;
}

}  // namespace

std::size_t emotion_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (kEmotionTypes[i] == name) return i;
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown emotion type '" + std::string(name) + "'");
}

void EmotionLexicon::add(std::string_view term, const EmotionLabelSet& emotions) {
  if (emotions.none()) throw Error(ErrorKind::kInvalidConfig, "lexicon entry without emotions");
  entries_[lower(term)] |= emotions;
}

const EmotionLabelSet* EmotionLexicon::find(std::string_view term) const {
  const auto it = entries_.find(std::string(term));
  return it == entries_.end() ? nullptr : &it->second;
}

EmotionLexicon EmotionLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open lexicon " + path.string());
  EmotionLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorKind::kMissingField,
                  path.string() + ":" + std::to_string(line_no) + ": expected term<TAB>emotions");
    }
    EmotionLabelSet set;
    std::stringstream emotions{std::string(body.substr(tab + 1))};
    std::string name;
    while (std::getline(emotions, name, ',')) {
      const auto n = trim(name);
      if (!n.empty()) set.set(emotion_index(lower(n)));
    }
    lex.add(trim(body.substr(0, tab)), set);
  }
  return lex;
}

void EmotionLexicon::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  for (const auto& [term, set] : entries_) {
    out << term << '\t';
    bool first = true;
    for (std::size_t i = 0; i < kNumEmotions; ++i) {
      if (!set.test(i)) continue;
      out << (first ? "" : ",") << kEmotionTypes[i];
      first = false;
    }
    out << '\n';
  }
}

EmotionLabelSet assign_emotions(std::string_view text, const EmotionLexicon& lexicon) {
  EmotionLabelSet bits;
  for (const auto& tok : text::tokenize(text)) {
    if (const auto* e = lexicon.find(tok)) bits |= *e;
  }
  return bits;
}

EmotionLabelSet assign_emotions(const corpus::Post& post, const EmotionLexicon& lexicon) {
  return assign_emotions(post.text, lexicon);
}

std::vector<EmotionLabelSet> assign_emotions(const corpus::Dataset& dataset,
                                             const EmotionLexicon& lexicon) {
  std::vector<EmotionLabelSet> out;
  out.reserve(dataset.posts.size());
  for (const auto& p : dataset.posts) out.push_back(assign_emotions(p, lexicon));
  return out;
}

std::array<std::size_t, kNumEmotions + 1> emotion_label_distribution(
    const std::vector<EmotionLabelSet>& labels) {
  std::array<std::size_t, kNumEmotions + 1> counts{};
  for (const auto& l : labels) ++counts[l.count()];
  return counts;
}

EmotionLexicon toy_lexicon() {
  EmotionLexicon lex;
  lex.add("sad", set_of({"sadness", "negative"}));
  lex.add("cry", set_of({"sadness", "negative"}));
  lex.add("alone", set_of({"sadness"}));
  lex.add("hopeless", set_of({"sadness", "negative"}));
  lex.add("hurt", set_of({"sadness", "negative"}));
  lex.add("empty", set_of({"sadness"}));
  lex.add("scared", set_of({"fear", "negative"}));
  lex.add("lost", set_of({"fear"}));
  lex.add("angry", set_of({"anger", "negative"}));
  lex.add("tired", set_of({"negative"}));
  lex.add(":(", set_of({"sadness"}));
  lex.add("happy", set_of({"other"}));
  lex.add("love", set_of({"other"}));
  lex.add("smile", set_of({"other"}));
  lex.add("fun", set_of({"other"}));
  lex.add("great", set_of({"other", "surprise"}));
  lex.add("gross", set_of({"disgust", "negative"}));
  return lex;
}

}  // namespace mmkd::emotion
