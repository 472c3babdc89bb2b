#include "newsrecon/keywords.hpp"

#include <cctype>
#include <set>

#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> s = {"a",  "an",   "the",  "in",    "on",   "at",  "of",  "and", "after",
                                          "as", "this", "that", "these", "with", "for", "from", "during"};
  return s;
}

std::string strip_punct(std::string_view w) {
  std::size_t b = 0, e = w.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(w[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(w[e - 1]))) --e;
  return std::string(w.substr(b, e - b));
}

}  // namespace

std::vector<std::string> CapitalizedPhraseProvider::extract(std::string_view input) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::vector<std::string> run;
  auto flush = [&] {
    if (!run.empty()) {
      auto phrase = text::join(run, " ");
      if (seen.insert(phrase).second) out.push_back(std::move(phrase));
    }
    run.clear();
  };
  bool sentence_start = true;
  for (const auto& raw : text::split(input, ' ')) {
    if (raw.empty()) continue;
    const std::string word = strip_punct(raw);
    const bool ends_sentence = raw.back() == '.' || raw.back() == '!' || raw.back() == '?';
    const bool breaks = ends_sentence || raw.back() == ',' || raw.back() == ';' || raw.back() == ':';
    const bool capital = !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
    const bool skip = sentence_start && stopwords().contains(text::to_lower(word));
    if (capital && !skip) {
      run.push_back(word);
    } else {
      flush();
    }
    if (breaks) flush();
    sentence_start = ends_sentence;
  }
  flush();
  return out;
}

}  // namespace newsrecon
