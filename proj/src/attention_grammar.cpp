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

#include "wpm/attention_grammar.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "wpm/unicode.hpp"

namespace wpm {

namespace {

enum class TokenKind { Escaped, OpenRound, OpenSquare, WeightClose, CloseRound, CloseSquare, Colon, Text };

struct Token {
  TokenKind kind;
  std::string_view lexeme;
  std::size_t offset;  // code points
  double weight = 1.0;
  bool malformed_weight = false;  // Colon only
};

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_run_terminator(char c) { return c == '\\' || c == '(' || c == ')' || c == '[' || c == ']' || c == ':'; }

struct WeightMatch {
  std::size_t length = 0;  // bytes including ':' and ')'; 0 when no match
  double weight = 0.0;
  bool malformed = false;
};

// Matches ":\s*[+-]?digits(.digits)?\s*)" at text[pos] == ':'.
WeightMatch match_weight_close(std::string_view text, std::size_t pos) {
  std::size_t i = pos + 1;
  const std::size_t n = text.size();
  while (i < n && is_ascii_space(text[i])) ++i;
  const std::size_t number_begin = i;

  // Anything numeral-like ending in ')' that fails the strict form is
  // reported as malformed.
  auto looks_numeric = [&] {
    std::size_t j = number_begin;
    while (j < n && (is_digit(text[j]) || text[j] == '.' || text[j] == '+' || text[j] == '-' || text[j] == 'e' ||
                     text[j] == 'E'))
      ++j;
    if (j == number_begin) return false;
    while (j < n && is_ascii_space(text[j])) ++j;
    return j < n && text[j] == ')';
  };

  if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
  const std::size_t digits_begin = i;
  while (i < n && is_digit(text[i])) ++i;
  if (i == digits_begin) return {0, 0.0, looks_numeric()};
  if (i < n && text[i] == '.') {
    const std::size_t frac_begin = ++i;
    while (i < n && is_digit(text[i])) ++i;
    if (i == frac_begin) return {0, 0.0, looks_numeric()};
  }
  const std::size_t number_end = i;
  while (i < n && is_ascii_space(text[i])) ++i;
  if (i >= n || text[i] != ')') return {0, 0.0, looks_numeric()};

  std::size_t parse_begin = number_begin;
  if (text[parse_begin] == '+') ++parse_begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data() + parse_begin, text.data() + number_end, value);
  if (ec != std::errc{} || ptr != text.data() + number_end || !std::isfinite(value)) return {0, 0.0, true};
  return {i + 1 - pos, value, false};
}

std::vector<Token> scan(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  std::size_t cp_offset = 0;
  auto push = [&](TokenKind kind, std::size_t length, double weight = 1.0, bool malformed = false) {
    const auto lexeme = text.substr(pos, length);
    tokens.push_back({kind, lexeme, cp_offset, weight, malformed});
    cp_offset += unicode::codepoint_count(lexeme, lexeme.size());
    pos += length;
  };

  while (pos < text.size()) {
    const char c = text[pos];
    switch (c) {
      case '\\':
        if (pos + 1 < text.size()) {
          push(TokenKind::Escaped, 1 + unicode::decode_one(text, pos + 1).length);
        } else {
          push(TokenKind::Text, 1);
        }
        break;
      case '(':
        push(TokenKind::OpenRound, 1);
        break;
      case '[':
        push(TokenKind::OpenSquare, 1);
        break;
      case ')':
        push(TokenKind::CloseRound, 1);
        break;
      case ']':
        push(TokenKind::CloseSquare, 1);
        break;
      case ':': {
        const auto m = match_weight_close(text, pos);
        if (m.length > 0) {
          push(TokenKind::WeightClose, m.length, m.weight);
        } else {
          push(TokenKind::Colon, 1, 1.0, m.malformed);
        }
        break;
      }
      default: {
        std::size_t end = pos;
        while (end < text.size() && !is_run_terminator(text[end])) ++end;
        push(TokenKind::Text, end - pos);
        break;
      }
    }
  }
  return tokens;
}

bool is_break_at(const std::vector<char32_t>& cps, std::size_t k) {
  static constexpr char32_t kBreak[] = {U'B', U'R', U'E', U'A', U'K'};
  if (k + 5 > cps.size()) return false;
  if (!std::equal(std::begin(kBreak), std::end(kBreak), cps.begin() + k)) return false;
  const bool left_edge = k == 0 || !unicode::is_word_char(cps[k - 1]);
  const bool right_edge = k + 5 == cps.size() || !unicode::is_word_char(cps[k + 5]);
  return left_edge && right_edge;
}

class SegmentBuilder {
 public:
  void append(std::string text, std::size_t offset) {
    if (text.empty()) return;
    segments_.push_back(WeightedSegment::text_run(std::move(text), 1.0, offset));
  }

  // Splits a text run on standalone BREAK words, consuming adjacent whitespace.
  void append_run(std::string_view run, std::size_t offset) {
    const auto cps = unicode::decode(run);
    const std::size_t n = cps.size();
    std::size_t piece_begin = 0;
    std::size_t k = 0;
    while (k + 5 <= n) {
      if (!is_break_at(cps, k)) {
        ++k;
        continue;
      }
      std::size_t left = k;
      while (left > piece_begin && unicode::is_whitespace(cps[left - 1])) --left;
      std::size_t right = k + 5;
      while (right < n && unicode::is_whitespace(cps[right])) ++right;
      append(slice(cps, piece_begin, left), offset + piece_begin);
      segments_.push_back(WeightedSegment::break_marker(offset + k));
      piece_begin = right;
      k = right;
    }
    append(slice(cps, piece_begin, n), offset + piece_begin);
  }

  std::vector<WeightedSegment>& segments() { return segments_; }

 private:
  static std::string slice(const std::vector<char32_t>& cps, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) unicode::append_utf8(out, cps[i]);
    return out;
  }

  std::vector<WeightedSegment> segments_;
};

}  // namespace

void multiply_range(std::vector<WeightedSegment>& segments, std::size_t start_position, double multiplier) {
  if (start_position > segments.size()) {
    throw std::out_of_range("multiply_range: start position " + std::to_string(start_position) +
                            " exceeds segment count " + std::to_string(segments.size()));
  }
  constexpr double kMax = std::numeric_limits<double>::max();
  for (std::size_t i = start_position; i < segments.size(); ++i) {
    auto& seg = segments[i];
    if (seg.is_break()) continue;
    seg.weight *= multiplier;
    // Saturate so nested huge weights never produce infinities.
    if (std::isinf(seg.weight)) seg.weight = std::copysign(kMax, seg.weight);
  }
}

void merge_equal_weights(std::vector<WeightedSegment>& segments) {
  std::vector<WeightedSegment> merged;
  merged.reserve(segments.size());
  for (auto& seg : segments) {
    if (!merged.empty() && !seg.is_break() && !merged.back().is_break() && merged.back().weight == seg.weight) {
      merged.back().text += seg.text;
    } else {
      merged.push_back(std::move(seg));
    }
  }
  segments = std::move(merged);
}

ParsedPrompt parse_prompt_attention(std::string_view text) {
  const auto cps = unicode::decode(text);
  if (std::all_of(cps.begin(), cps.end(), unicode::is_whitespace)) {
    return {{WeightedSegment::text_run("", 1.0, 0)}, std::string(text)};
  }

  SegmentBuilder builder;
  auto& res = builder.segments();
  std::vector<std::size_t> round_brackets;
  std::vector<std::size_t> square_brackets;

  for (const auto& tok : scan(text)) {
    switch (tok.kind) {
      case TokenKind::Escaped:
        builder.append(std::string(tok.lexeme.substr(1)), tok.offset);
        break;
      case TokenKind::OpenRound:
        round_brackets.push_back(res.size());
        break;
      case TokenKind::OpenSquare:
        square_brackets.push_back(res.size());
        break;
      case TokenKind::WeightClose:
        if (!round_brackets.empty()) {
          multiply_range(res, round_brackets.back(), tok.weight);
          round_brackets.pop_back();
        } else {
          builder.append_run(tok.lexeme, tok.offset);
        }
        break;
      case TokenKind::CloseRound:
        if (!round_brackets.empty()) {
          multiply_range(res, round_brackets.back(), kRoundBracketMultiplier);
          round_brackets.pop_back();
        } else {
          builder.append(")", tok.offset);
        }
        break;
      case TokenKind::CloseSquare:
        if (!square_brackets.empty()) {
          multiply_range(res, square_brackets.back(), kSquareBracketMultiplier);
          square_brackets.pop_back();
        } else {
          builder.append("]", tok.offset);
        }
        break;
      case TokenKind::Colon:
        builder.append(":", tok.offset);
        break;
      case TokenKind::Text:
        builder.append_run(tok.lexeme, tok.offset);
        break;
    }
  }

  for (std::size_t pos : round_brackets) multiply_range(res, pos, kRoundBracketMultiplier);
  for (std::size_t pos : square_brackets) multiply_range(res, pos, kSquareBracketMultiplier);

  merge_equal_weights(res);
  if (res.empty()) res.push_back(WeightedSegment::text_run("", 1.0, 0));
  return {std::move(res), std::string(text)};
}

namespace {

// Whitespace touching a BREAK is consumed on reparse, so edges next to one are
// escaped when requested.
std::string escape_impl(std::string_view text, bool escape_leading_space, bool escape_trailing_space) {
  const auto cps = unicode::decode(text);
  std::size_t lead_end = 0;
  if (escape_leading_space)
    while (lead_end < cps.size() && unicode::is_whitespace(cps[lead_end])) ++lead_end;
  std::size_t trail_begin = cps.size();
  if (escape_trailing_space)
    while (trail_begin > lead_end && unicode::is_whitespace(cps[trail_begin - 1])) --trail_begin;

  std::string out;
  out.reserve(text.size());
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const char32_t cp = cps[k];
    if (cp == U'(' || cp == U')' || cp == U'[' || cp == U']' || cp == U'\\' || (cp == U'B' && is_break_at(cps, k)) ||
        k < lead_end || k >= trail_begin) {
      out.push_back('\\');
    }
    unicode::append_utf8(out, cp);
  }
  return out;
}

}  // namespace

std::string escape_text(std::string_view text) { return escape_impl(text, false, false); }

std::string format_weight(double weight) {
  char buf[512];
  const auto [ptr, ec] = std::to_chars(std::begin(buf), std::end(buf), weight, std::chars_format::fixed);
  if (ec != std::errc{}) throw std::runtime_error("format_weight: value does not fit");
  return {std::begin(buf), ptr};
}

std::string serialize(const std::vector<WeightedSegment>& segments) {
  auto merged = segments;
  merge_equal_weights(merged);
  std::string out;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto& seg = merged[i];
    if (seg.is_break()) {
      out += " BREAK ";
    } else if (seg.weight == 1.0) {
      // A lone whitespace-only segment must not serialize to whitespace-only
      // input, which parses as empty.
      const bool alone = merged.size() == 1;
      const bool after_break = alone || (i > 0 && merged[i - 1].is_break());
      const bool before_break = alone || (i + 1 < merged.size() && merged[i + 1].is_break());
      out += escape_impl(seg.text, after_break, before_break);
    } else {
      out += '(';
      out += escape_text(seg.text);
      out += ':';
      out += format_weight(seg.weight);
      out += ')';
    }
  }
  return out;
}

std::string serialize(const ParsedPrompt& prompt) { return serialize(prompt.segments); }

std::string strip_markers(const ParsedPrompt& prompt) {
  std::string out;
  for (const auto& seg : prompt.segments) {
    if (!seg.is_break()) out += seg.text;
  }
  return out;
}

bool WeightPolicy::allows(double weight) const {
  if (weight == 1.0 || !constrained()) return true;
  return (emphasis && emphasis->contains(weight)) || (deemphasis && deemphasis->contains(weight));
}

bool LintReport::has_errors() const { return count(Severity::Error) > 0; }

std::size_t LintReport::count(Severity severity) const {
  std::size_t n = 0;
  for (const auto& d : diagnostics) n += d.severity == severity ? 1 : 0;
  return n;
}

LintReport lint(const ParsedPrompt& prompt, const WeightPolicy& policy) {
  LintReport report;
  auto& out = report.diagnostics;

  // Structural degradations, found by replaying the bracket stacks.
  std::vector<std::size_t> round_open;
  std::vector<std::size_t> square_open;
  for (const auto& tok : scan(prompt.source)) {
    switch (tok.kind) {
      case TokenKind::OpenRound:
        round_open.push_back(tok.offset);
        break;
      case TokenKind::OpenSquare:
        square_open.push_back(tok.offset);
        break;
      case TokenKind::WeightClose:
        if (round_open.empty()) {
          out.push_back({Severity::Warning, tok.offset, "explicit weight without an opening '(' is literal text"});
        } else {
          round_open.pop_back();
        }
        break;
      case TokenKind::CloseRound:
        if (round_open.empty()) {
          out.push_back({Severity::Warning, tok.offset, "stray ')' is literal text"});
        } else {
          round_open.pop_back();
        }
        break;
      case TokenKind::CloseSquare:
        if (square_open.empty()) {
          out.push_back({Severity::Warning, tok.offset, "stray ']' is literal text"});
        } else {
          square_open.pop_back();
        }
        break;
      case TokenKind::Colon:
        if (tok.malformed_weight) out.push_back({Severity::Error, tok.offset, "malformed explicit weight"});
        break;
      default:
        break;
    }
  }
  for (std::size_t pos : round_open) out.push_back({Severity::Warning, pos, "unclosed '(' extends to end of prompt"});
  for (std::size_t pos : square_open) out.push_back({Severity::Warning, pos, "unclosed '[' extends to end of prompt"});

  bool any_weighted = false;
  for (const auto& seg : prompt.segments) {
    if (seg.is_break() || seg.weight == 1.0) continue;
    any_weighted = true;
    const std::size_t pos = seg.offset == kNoOffset ? 0 : seg.offset;
    if (seg.weight <= 0.0) {
      out.push_back({Severity::Warning, pos, "non-positive weight " + format_weight(seg.weight)});
    } else if (!policy.allows(seg.weight)) {
      out.push_back({Severity::Warning, pos, "weight " + format_weight(seg.weight) + " outside policy ranges"});
    }
  }
  if (!any_weighted) out.push_back({Severity::Warning, 0, "no weighted segments"});
  return report;
}

void to_json(nlohmann::json& j, const WeightedSegment& segment) {
  if (segment.is_break()) {
    j = {{"kind", "break"}};
  } else {
    j = {{"kind", "text"}, {"text", segment.text}, {"weight", segment.weight}};
  }
}

void from_json(const nlohmann::json& j, WeightedSegment& segment) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "break") {
    segment = WeightedSegment::break_marker();
  } else if (kind == "text") {
    segment = WeightedSegment::text_run(j.at("text").get<std::string>(), j.at("weight").get<double>());
  } else {
    throw std::invalid_argument("unknown segment kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const ParsedPrompt& prompt) {
  j = {{"segments", prompt.segments}, {"source", prompt.source}};
}

void from_json(const nlohmann::json& j, ParsedPrompt& prompt) {
  prompt.segments = j.at("segments").get<std::vector<WeightedSegment>>();
  prompt.source = j.value("source", std::string{});
}

void to_json(nlohmann::json& j, const LintReport& report) {
  auto diags = nlohmann::json::array();
  for (const auto& d : report.diagnostics) {
    diags.push_back({{"severity", d.severity == Severity::Error ? "error" : "warning"},
                     {"position", d.position},
                     {"message", d.message}});
  }
  j = {{"diagnostics", diags}};
}

}  // namespace wpm
