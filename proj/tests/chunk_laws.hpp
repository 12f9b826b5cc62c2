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

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wpm/chunker.hpp"

namespace wpm::testing {

inline TokenizedPrompt token_stream(std::size_t n, TokenId first = 1000) {
  TokenizedPrompt t;
  for (std::size_t i = 0; i < n; ++i) {
    t.ids.push_back(first + static_cast<TokenId>(i % 5000));
    t.weights.push_back(1.0 + 0.01 * static_cast<double>(i % 7));
    t.provenance.push_back(0);
  }
  return t;
}

inline std::size_t expected_block_count(std::size_t n, std::vector<std::size_t> breaks, bool honor) {
  std::vector<std::size_t> cuts;
  if (honor) cuts = std::move(breaks);
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  std::size_t count = 0;
  std::size_t begin = 0;
  for (std::size_t at : cuts) {
    if (at <= begin) continue;
    const std::size_t len = at - begin;
    count += len / kBlockContent + (len % kBlockContent > 0 ? 1 : 0);
    begin = at;
  }
  return std::max<std::size_t>(count, 1);
}

// Returns an empty string when every block is framed by bos/eos, padding is
// eos at weight 1.0, and padded blocks are full width.
inline std::string framing_violation(const ChunkedPrompt& c, const Vocabulary& v) {
  if (c.blocks.empty()) return "no blocks";
  for (std::size_t k = 0; k < c.blocks.size(); ++k) {
    const auto& b = c.blocks[k];
    const std::string at = " in block " + std::to_string(k);
    if (b.ids.size() != b.weights.size()) return "ids/weights length mismatch" + at;
    if (b.size() < 2 || b.size() > kBlockLength) return "bad block length " + std::to_string(b.size()) + at;
    if (b.ids.front() != v.bos_id() || b.ids.back() != v.eos_id()) return "missing bos/eos" + at;
    if (b.weights.front() != 1.0 || b.weights.back() != 1.0) return "bos/eos weight not 1.0" + at;
    if (1 + b.content_size > b.size() - 1) return "content overruns block" + at;
    for (std::size_t i = 1 + b.content_size; i + 1 < b.size(); ++i)
      if (b.ids[i] != v.eos_id() || b.weights[i] != 1.0) return "padding is not eos@1.0" + at;
    if (c.padded && b.size() != kBlockLength) return "padded block shorter than 77" + at;
  }
  return {};
}

inline std::string reconstruction_violation(const ChunkedPrompt& c, const TokenizedPrompt& t) {
  std::vector<TokenId> ids;
  std::vector<double> weights;
  for (const auto& b : c.blocks) {
    const auto n = static_cast<std::ptrdiff_t>(b.content_size);
    ids.insert(ids.end(), b.ids.begin() + 1, b.ids.begin() + 1 + n);
    weights.insert(weights.end(), b.weights.begin() + 1, b.weights.begin() + 1 + n);
  }
  if (ids != t.ids) return "content ids differ from input stream";
  if (weights != t.weights) return "content weights differ from input stream";
  return {};
}

// Every chunking law for one stream, its negative, and one flag combination.
inline std::string chunk_law_violation(const TokenizedPrompt& t, const TokenizedPrompt& negative, bool pad, bool honor,
                                       const Vocabulary& v) {
  const ChunkOptions options{.pad_last_block = pad, .honor_breaks = honor};
  const auto c = group_tokens_and_weights(t, v, options);
  if (auto e = framing_violation(c, v); !e.empty()) return e;
  if (auto e = reconstruction_violation(c, t); !e.empty()) return e;
  if (c.blocks.size() != expected_block_count(t.size(), t.breaks, honor)) {
    return "block count " + std::to_string(c.blocks.size()) + ", expected " +
           std::to_string(expected_block_count(t.size(), t.breaks, honor));
  }
  const auto [pos, neg] = group_paired(t, negative, v, options);
  if (auto e = framing_violation(pos, v); !e.empty()) return "positive: " + e;
  if (auto e = framing_violation(neg, v); !e.empty()) return "negative: " + e;
  if (pos.blocks.size() != neg.blocks.size()) return "paired block counts differ";
  // Without breaks (or with padding) every block pair has the same width.
  if (pad || !honor || t.breaks.empty()) {
    for (std::size_t k = 0; k < pos.blocks.size(); ++k)
      if (pos.blocks[k].size() != neg.blocks[k].size()) return "paired block widths differ at " + std::to_string(k);
  }
  return {};
}

// One random stream in the 0..1000 range with up to six break positions.
inline TokenizedPrompt random_stream(std::mt19937_64& rng, int trial) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 1000)(rng);
  auto t = token_stream(n, static_cast<TokenId>(trial));
  const int break_count = std::uniform_int_distribution<int>(0, 6)(rng);
  for (int b = 0; b < break_count; ++b) t.breaks.push_back(std::uniform_int_distribution<std::size_t>(0, n)(rng));
  std::sort(t.breaks.begin(), t.breaks.end());
  return t;
}

}  // namespace wpm::testing
