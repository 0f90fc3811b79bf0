// Small string helpers used by the parsers and prompt builders.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace agentlab::text {

std::string_view trim(std::string_view s);
std::string lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Strips leading and trailing whitespace and ASCII punctuation.
std::string strip_punct(std::string_view s);

/// Items of a numbered list ("1. foo", "2) bar"), in order of appearance.
/// Lines that are not list items are ignored.
std::vector<std::string> parse_numbered_list(std::string_view s);

/// First non-empty line, trimmed; empty when there is none.
std::string first_line(std::string_view s);

/// Case-insensitive search for `phrase` bounded by non-alphanumerics.
bool contains_phrase(std::string_view haystack, std::string_view phrase);

/// Lowercased alphanumeric words.
std::vector<std::string> words(std::string_view s);

}  // namespace agentlab::text
