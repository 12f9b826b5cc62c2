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

#include "wpm/chunker.hpp"

#include <algorithm>

namespace wpm {

namespace {

ChunkBlock make_block(const TokenizedPrompt& tokens, std::size_t begin, std::size_t end, const Vocabulary& vocab,
                      bool pad) {
  ChunkBlock block;
  const std::size_t content = end - begin;
  const std::size_t length = (pad ? kBlockContent : content) + 2;
  block.ids.reserve(length);
  block.weights.reserve(length);
  block.content_size = content;

  block.ids.push_back(vocab.bos_id());
  block.weights.push_back(1.0);
  block.ids.insert(block.ids.end(), tokens.ids.begin() + begin, tokens.ids.begin() + end);
  block.weights.insert(block.weights.end(), tokens.weights.begin() + begin, tokens.weights.begin() + end);
  if (pad) {
    block.ids.resize(length - 1, vocab.eos_id());
    block.weights.resize(length - 1, 1.0);
  }
  block.ids.push_back(vocab.eos_id());
  block.weights.push_back(1.0);
  return block;
}

// Full blocks of 75 while at least 75 remain, then the remainder (if any).
void chunk_section(const TokenizedPrompt& tokens, std::size_t begin, std::size_t end, const Vocabulary& vocab,
                   bool pad, std::vector<ChunkBlock>& out) {
  while (end - begin >= kBlockContent) {
    out.push_back(make_block(tokens, begin, begin + kBlockContent, vocab, false));
    begin += kBlockContent;
  }
  if (begin < end) out.push_back(make_block(tokens, begin, end, vocab, pad));
}

}  // namespace

ChunkBlock padding_block(const Vocabulary& vocab, bool padded) {
  return make_block(TokenizedPrompt{}, 0, 0, vocab, padded);
}

ChunkedPrompt group_tokens_and_weights(const TokenizedPrompt& tokens, const Vocabulary& vocab,
                                       const ChunkOptions& options) {
  ChunkedPrompt out;
  out.padded = options.pad_last_block;
  const std::size_t n = tokens.ids.size();

  std::size_t begin = 0;
  if (options.honor_breaks) {
    auto breaks = tokens.breaks;
    std::sort(breaks.begin(), breaks.end());
    for (std::size_t at : breaks) {
      at = std::min(at, n);
      if (at <= begin) continue;
      chunk_section(tokens, begin, at, vocab, options.pad_last_block, out.blocks);
      begin = at;
    }
  }
  chunk_section(tokens, begin, n, vocab, options.pad_last_block, out.blocks);

  if (out.blocks.empty()) out.blocks.push_back(padding_block(vocab, options.pad_last_block));
  return out;
}

std::pair<TokenizedPrompt, TokenizedPrompt> pair_with_negative(TokenizedPrompt positive, TokenizedPrompt negative,
                                                               const Vocabulary& vocab) {
  auto pad_to = [&](TokenizedPrompt& t, std::size_t length) {
    if (t.ids.size() >= length) return;
    t.ids.resize(length, vocab.eos_id());
    t.weights.resize(length, 1.0);
    t.provenance.resize(length, kNoSegment);
  };
  const std::size_t length = std::max(positive.ids.size(), negative.ids.size());
  pad_to(positive, length);
  pad_to(negative, length);
  return {std::move(positive), std::move(negative)};
}

void equalize_block_counts(ChunkedPrompt& a, ChunkedPrompt& b, const Vocabulary& vocab) {
  auto& shorter = a.blocks.size() < b.blocks.size() ? a : b;
  const std::size_t target = std::max(a.blocks.size(), b.blocks.size());
  while (shorter.blocks.size() < target) shorter.blocks.push_back(padding_block(vocab, shorter.padded));
}

std::pair<ChunkedPrompt, ChunkedPrompt> group_paired(TokenizedPrompt positive, TokenizedPrompt negative,
                                                     const Vocabulary& vocab, const ChunkOptions& options) {
  auto [pos, neg] = pair_with_negative(std::move(positive), std::move(negative), vocab);
  auto pos_chunks = group_tokens_and_weights(pos, vocab, options);
  auto neg_chunks = group_tokens_and_weights(neg, vocab, options);
  equalize_block_counts(pos_chunks, neg_chunks, vocab);
  return {std::move(pos_chunks), std::move(neg_chunks)};
}

void to_json(nlohmann::json& j, const ChunkBlock& block) {
  j = {{"ids", block.ids}, {"weights", block.weights}};
}

void to_json(nlohmann::json& j, const ChunkedPrompt& chunks) {
  j = {{"padded", chunks.padded}, {"blocks", chunks.blocks}};
}

}  // namespace wpm
