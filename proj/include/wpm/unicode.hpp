/* Copyright (c) 2026 The WPM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace wpm::unicode {

// Bytes that are not part of a well-formed UTF-8 sequence decode to
// kRawByteBase + byte (a lone low surrogate) and encode back to the raw byte,
// so decode/encode is lossless for arbitrary input.
inline constexpr char32_t kRawByteBase = 0xDC00;

struct Decoded {
  char32_t codepoint;
  std::size_t length;  // bytes consumed
};

// Decodes the code point starting at byte offset `pos` (pos < text.size()).
Decoded decode_one(std::string_view text, std::size_t pos);

std::vector<char32_t> decode(std::string_view text);

void append_utf8(std::string& out, char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

// Number of code points in text[0, byte_offset).
std::size_t codepoint_count(std::string_view text, std::size_t byte_offset);

bool is_letter(char32_t cp);      // general category L*
bool is_number(char32_t cp);      // general category N*
bool is_whitespace(char32_t cp);  // matches str.isspace()
bool is_word_char(char32_t cp);   // letter, number or '_'

// Full lowercase mapping; a code point may lower to two (U+0130).
void append_lower(std::vector<char32_t>& out, char32_t cp);

}  // namespace wpm::unicode
