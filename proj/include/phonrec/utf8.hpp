#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace phonrec::utf8 {

// Decodes UTF-8 into code points. Throws Error(ParseError) on malformed input.
std::u32string decode(std::string_view text);

std::string encode(char32_t cp);
std::string encode(std::u32string_view cps);

std::size_t length(std::string_view text);

// Combining diacritics (U+0300..U+036F), excluding the tie bars.
bool is_combining(char32_t cp);
bool is_tie_bar(char32_t cp);
// Spacing modifier letters such as ʰ or ʲ, and both length marks.
bool is_modifier(char32_t cp);
bool is_length_mark(char32_t cp);

// Splits on runs of `sep`, dropping empty fields.
std::vector<std::string> split_words(std::string_view text, char sep = ' ');
// Splits on every `sep`, keeping empty fields.
std::vector<std::string> split_fields(std::string_view text, char sep);

std::string trim(std::string_view text);

}  // namespace phonrec::utf8
