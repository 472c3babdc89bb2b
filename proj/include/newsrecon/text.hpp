#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace newsrecon::text {

/// ASCII case-fold, trim, collapse internal whitespace runs to one space.
std::string normalize_space(std::string_view s);

/// normalize_space plus punctuation (anything not alnum, space or non-ASCII)
/// replaced by spaces before collapsing.
std::string normalize_loose(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool contains(std::string_view haystack, std::string_view needle);

/// Every occurrence of `from` replaced by `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// "Paris (France)" -> "Paris, France"; other strings unchanged.
std::string unparenthesize(std::string_view s);

}  // namespace newsrecon::text
