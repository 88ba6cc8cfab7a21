#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gnr::text {

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// True when `s` is well-formed UTF-8 (no overlongs, surrogates or values past U+10FFFF).
bool is_valid_utf8(std::string_view s);

// Lowercased word tokens; ASCII punctuation and whitespace are boundaries and
// are dropped. Bytes >= 0x80 are treated as word characters.
std::vector<std::string> words(std::string_view s);

// Words with original case preserved, same boundary rule as `words`.
std::vector<std::string> raw_words(std::string_view s);

// Sentences split after '.', '!' or '?' followed by whitespace or end of text.
// Each sentence keeps its terminator and is trimmed; empty pieces are dropped.
std::vector<std::string> sentences(std::string_view s);

std::string first_sentence(std::string_view s);

// Truncate a phrase to at most `max_words` whitespace-separated words.
std::string truncate_words(std::string_view phrase, std::size_t max_words);

std::size_t word_count(std::string_view phrase);

// Jaccard overlap between the lowercased word sets of two texts; 0 when both are empty.
double jaccard(std::string_view a, std::string_view b);

// SHA-256 hex digest.
std::string sha256_hex(std::string_view data);

}  // namespace gnr::text
