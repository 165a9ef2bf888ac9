#pragma once

// UTF-8 helpers. All character offsets in vsn are Unicode code-point
// indices, so Cantonese and English transcripts slice identically.

#include <string>
#include <string_view>

namespace vsn::text {

// Sentence/clause punctuation used to shift slice boundaries.
inline constexpr std::u32string_view kDefaultSlicePunctuation = U"。，？！；.,?!;";

// Broader set used to decide whether a token is a word at all.
inline constexpr std::u32string_view kTokenPunctuation =
    U"。，？！；：、「」『』（）《》〈〉“”‘’…—·.,?!;:'\"()[]{}<>-_/\\*&%$#@~`|+=^";

std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

// ASCII-only lowercase; multibyte sequences pass through untouched.
std::string to_lower(std::string_view s);

bool is_space(char32_t c) noexcept;

// True when every code point is whitespace or listed in `punctuation`.
bool is_punctuation_token(std::string_view surface,
                          std::u32string_view punctuation = kTokenPunctuation);

}  // namespace vsn::text
