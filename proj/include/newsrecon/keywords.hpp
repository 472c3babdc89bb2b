#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace newsrecon {

/// Extracts query keywords (typically named entities) from a caption.
class KeywordProvider {
 public:
  virtual ~KeywordProvider() = default;
  virtual std::vector<std::string> extract(std::string_view text) const = 0;
};

/// Fallback provider: runs of capitalized words, skipping sentence-initial
/// stopwords. A real NER model plugs in behind the same interface.
class CapitalizedPhraseProvider : public KeywordProvider {
 public:
  std::vector<std::string> extract(std::string_view text) const override;
};

}  // namespace newsrecon
