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
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace wpm {

// Attention-marker grammar:
//   (text)      weight x 1.1
//   [text]      weight / 1.1
//   (text:w)    weight x w, w = [+-]?digits[.digits]
//   \c          literal c
//   BREAK       standalone word, splits the prompt
// Malformed markers never fail the parse; they become literal text and are
// reported by lint().

inline constexpr double kRoundBracketMultiplier = 1.1;
inline constexpr double kSquareBracketMultiplier = 1.0 / 1.1;
inline constexpr std::size_t kNoOffset = std::numeric_limits<std::size_t>::max();

enum class SegmentKind { Text, Break };

struct WeightedSegment {
  SegmentKind kind = SegmentKind::Text;
  std::string text;
  double weight = 1.0;
  // Code-point offset in the source of the segment's first character.
  std::size_t offset = kNoOffset;

  static WeightedSegment text_run(std::string text, double weight = 1.0, std::size_t offset = kNoOffset) {
    return {SegmentKind::Text, std::move(text), weight, offset};
  }
  static WeightedSegment break_marker(std::size_t offset = kNoOffset) {
    return {SegmentKind::Break, {}, 1.0, offset};
  }

  bool is_break() const { return kind == SegmentKind::Break; }

  // Offsets are provenance only and do not take part in equality.
  friend bool operator==(const WeightedSegment& a, const WeightedSegment& b) {
    if (a.kind != b.kind) return false;
    if (a.is_break()) return true;
    return a.text == b.text && a.weight == b.weight;
  }
};

struct ParsedPrompt {
  std::vector<WeightedSegment> segments;
  std::string source;
};

ParsedPrompt parse_prompt_attention(std::string_view text);

// Multiplies the weight of every Text segment at index >= start_position.
// Throws std::out_of_range when start_position > segments.size().
void multiply_range(std::vector<WeightedSegment>& segments, std::size_t start_position, double multiplier);

// Merges adjacent Text segments whose weights compare equal.
void merge_equal_weights(std::vector<WeightedSegment>& segments);

// Escapes brackets, backslashes and standalone BREAK so the text parses back
// as a single literal run.
std::string escape_text(std::string_view text);

// Canonical text form; parse(serialize(p)) reproduces p's segments.
std::string serialize(const ParsedPrompt& prompt);
std::string serialize(const std::vector<WeightedSegment>& segments);

// Concatenated Text segment texts (the prompt with all markers removed).
std::string strip_markers(const ParsedPrompt& prompt);

std::string format_weight(double weight);

struct WeightRange {
  double low;
  double high;

  bool contains(double w) const { return w >= low && w <= high; }
};

struct WeightPolicy {
  std::optional<WeightRange> emphasis;
  std::optional<WeightRange> deemphasis;

  static WeightPolicy ranged() { return {WeightRange{1.5, 1.8}, WeightRange{0.7, 0.9}}; }
  static WeightPolicy unconstrained() { return {}; }

  bool constrained() const { return emphasis.has_value() || deemphasis.has_value(); }
  bool allows(double weight) const;
};

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity;
  std::size_t position;  // code-point offset into ParsedPrompt::source
  std::string message;
};

struct LintReport {
  std::vector<Diagnostic> diagnostics;

  bool has_errors() const;
  std::size_t count(Severity severity) const;
};

LintReport lint(const ParsedPrompt& prompt, const WeightPolicy& policy);

void to_json(nlohmann::json& j, const WeightedSegment& segment);
void from_json(const nlohmann::json& j, WeightedSegment& segment);
void to_json(nlohmann::json& j, const ParsedPrompt& prompt);
void from_json(const nlohmann::json& j, ParsedPrompt& prompt);
void to_json(nlohmann::json& j, const LintReport& report);

}  // namespace wpm
