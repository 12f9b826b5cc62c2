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

#include <algorithm>
#include <random>

#include "chunk_laws.hpp"
#include "test_support.hpp"
#include "wpm/chunker.hpp"

namespace wpm {
namespace {

using testing::clip_vocab;

TokenizedPrompt stream(std::size_t n, TokenId first = 1000) { return testing::token_stream(n, first); }

ChunkedPrompt chunk(const TokenizedPrompt& t, bool pad, bool breaks = true) {
  return group_tokens_and_weights(t, *clip_vocab(), ChunkOptions{.pad_last_block = pad, .honor_breaks = breaks});
}

std::vector<std::size_t> lengths(const ChunkedPrompt& c) {
  std::vector<std::size_t> out;
  for (const auto& b : c.blocks) out.push_back(b.size());
  return out;
}

void expect_framed(const ChunkedPrompt& c) { EXPECT_EQ(testing::framing_violation(c, *clip_vocab()), ""); }

TEST(Chunker, TwoFullBlocks) {
  const auto c = chunk(stream(150), false);
  EXPECT_EQ(lengths(c), (std::vector<std::size_t>{77, 77}));
  expect_framed(c);
  EXPECT_EQ(c.blocks[1].content_size, 75u);
}

TEST(Chunker, SeventySixPadded) {
  const auto c = chunk(stream(76), true);
  EXPECT_EQ(lengths(c), (std::vector<std::size_t>{77, 77}));
  EXPECT_EQ(c.blocks[1].content_size, 1u);
  EXPECT_EQ(std::count(c.blocks[1].ids.begin(), c.blocks[1].ids.end(), clip_vocab()->eos_id()), 75);
  expect_framed(c);
}

TEST(Chunker, ShortRemainderUnpadded) {
  const auto c = chunk(stream(10), false);
  EXPECT_EQ(lengths(c), (std::vector<std::size_t>{12}));
}

TEST(Chunker, ExactlySeventyFive) {
  EXPECT_EQ(lengths(chunk(stream(75), false)), (std::vector<std::size_t>{77}));
  EXPECT_EQ(lengths(chunk(stream(75), true)), (std::vector<std::size_t>{77}));
}

TEST(Chunker, EmptyStream) {
  const auto padded = chunk(stream(0), true);
  ASSERT_EQ(padded.blocks.size(), 1u);
  EXPECT_EQ(padded.blocks[0].size(), 77u);
  EXPECT_EQ(std::count(padded.blocks[0].ids.begin(), padded.blocks[0].ids.end(), clip_vocab()->eos_id()), 76);
  EXPECT_EQ(lengths(chunk(stream(0), false)), (std::vector<std::size_t>{2}));
}

TEST(Chunker, BreakClosesBlock) {
  auto t = stream(20);
  t.breaks = {5};
  const auto c = chunk(t, false);
  EXPECT_EQ(lengths(c), (std::vector<std::size_t>{7, 17}));
  EXPECT_EQ(lengths(chunk(t, false, false)), (std::vector<std::size_t>{22}));
  EXPECT_EQ(lengths(chunk(t, true)), (std::vector<std::size_t>{77, 77}));
}

TEST(Chunker, PairWithNegative) {
  const auto& v = *clip_vocab();
  auto [p, n] = pair_with_negative(stream(80), stream(5), v);
  EXPECT_EQ(p.size(), 80u);
  ASSERT_EQ(n.size(), 80u);
  EXPECT_EQ(std::count(n.ids.begin(), n.ids.end(), v.eos_id()), 75);
  EXPECT_EQ(n.weights.back(), 1.0);

  auto [p2, n2] = pair_with_negative(stream(10), stream(10, 7), v);
  EXPECT_EQ(p2.ids, stream(10).ids);
  EXPECT_EQ(n2.ids, stream(10, 7).ids);

  auto [p3, n3] = pair_with_negative(stream(3), TokenizedPrompt{}, v);
  EXPECT_EQ(n3.ids, (std::vector<TokenId>(3, v.eos_id())));
  EXPECT_EQ(n3.provenance, (std::vector<std::size_t>(3, kNoSegment)));
}

TEST(Chunker, Json) {
  const nlohmann::json j = chunk(stream(1), false);
  EXPECT_EQ(j.dump(), R"({"blocks":[{"ids":[49406,1000,49407],"weights":[1.0,1.0,1.0]}],"padded":false})");
}

TEST(ChunkerProperty, RandomStreams) {
  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = testing::random_stream(rng, trial);
    const auto negative = stream(std::uniform_int_distribution<std::size_t>(0, 300)(rng), 3);
    for (bool pad : {false, true})
      for (bool honor : {true, false})
        ASSERT_EQ(testing::chunk_law_violation(t, negative, pad, honor, *clip_vocab()), "")
            << "trial " << trial << " n=" << t.size() << " pad=" << pad << " honor=" << honor;
  }
}

}  // namespace
}  // namespace wpm
