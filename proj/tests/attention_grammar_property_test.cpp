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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "prompt_generator.hpp"
#include "test_support.hpp"
#include "wpm/attention_grammar.hpp"

namespace wpm {
namespace {

using Segs = std::vector<WeightedSegment>;

// Arbitrary character soup, including malformed constructs.
std::string fuzz_prompt(std::mt19937_64& rng) {
  static const std::vector<std::string> alphabet = {"a", "b", " ", " ", "(", ")", "[", "]", "\\", ":", "1", ".",
                                                    "5", "-", "BREAK", "\n", "é", "“", "\t", "0", "e"};
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += alphabet[ch(rng)];
  return s;
}

void expect_well_formed(const Segs& segs, const std::string& input) {
  ASSERT_FALSE(segs.empty()) << input;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].is_break()) {
      EXPECT_TRUE(segs[i].text.empty());
      continue;
    }
    EXPECT_TRUE(std::isfinite(segs[i].weight)) << input;
    if (i + 1 < segs.size() && !segs[i + 1].is_break()) EXPECT_NE(segs[i].weight, segs[i + 1].weight) << input;
  }
}

TEST(AttentionGrammarProperty, GeneratedPromptsMatchModel) {
  testing::PromptGenerator gen(20260101);
  for (int i = 0; i < 1000; ++i) {
    const auto [text, expected] = gen.next();
    const auto parsed = parse_prompt_attention(text);
    ASSERT_EQ(parsed.segments, expected) << text;
  }
}

TEST(AttentionGrammarProperty, SerializeParseFixpoint) {
  testing::PromptGenerator gen(7);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = i % 2 == 0 ? gen.next().first : fuzz_prompt(rng);
    const auto parsed = parse_prompt_attention(text);
    const auto again = parse_prompt_attention(serialize(parsed));
    ASSERT_EQ(again.segments, parsed.segments) << text << "\n-> " << serialize(parsed);
    EXPECT_EQ(serialize(again), serialize(parsed));
  }
}

TEST(AttentionGrammarProperty, MergeIdempotence) {
  testing::PromptGenerator gen(8);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = i % 2 == 0 ? gen.next().first : fuzz_prompt(rng);
    const auto parsed = parse_prompt_attention(text);
    expect_well_formed(parsed.segments, text);
    auto merged = parsed.segments;
    merge_equal_weights(merged);
    ASSERT_EQ(merged, parsed.segments) << text;
  }
}

TEST(AttentionGrammarProperty, TextReconstruction) {
  testing::PromptGenerator gen(9);
  for (int i = 0; i < 1000; ++i) {
    const auto [text, expected] = gen.next();
    std::string want;
    for (const auto& seg : expected) want += seg.text;
    ASSERT_EQ(strip_markers(parse_prompt_attention(text)), want) << text;
  }
}

TEST(AttentionGrammarProperty, NestingPowers) {
  for (int k = 0; k <= 6; ++k) {
    const std::string round = std::string(static_cast<std::size_t>(k), '(') + "w" + std::string(static_cast<std::size_t>(k), ')');
    const std::string square = std::string(static_cast<std::size_t>(k), '[') + "w" + std::string(static_cast<std::size_t>(k), ']');
    const auto r = parse_prompt_attention(round).segments;
    const auto s = parse_prompt_attention(square).segments;
    ASSERT_EQ(r.size(), 1u);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_NEAR(r[0].weight, std::pow(1.1, k), 1e-9) << k;
    EXPECT_NEAR(s[0].weight, std::pow(1.0 / 1.1, k), 1e-9) << k;
  }
}

TEST(AttentionGrammarProperty, Deterministic) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto text = fuzz_prompt(rng);
    EXPECT_EQ(serialize(parse_prompt_attention(text)), serialize(parse_prompt_attention(text)));
  }
}

}  // namespace
}  // namespace wpm
