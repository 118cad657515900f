#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace senti {

using Tokens = std::vector<std::string>;

// Lowercase, drop ASCII punctuation, split on whitespace. Candidates and
// references go through the same function before any metric sees them.
Tokens tokenize(std::string_view text);

// tokenize() joined back with single spaces.
std::string normalize(std::string_view text);

std::string join(const Tokens& words, std::string_view sep = " ");

// Splits on a single character, keeping empty fields.
std::vector<std::string> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

}  // namespace senti
