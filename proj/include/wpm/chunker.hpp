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
#include <utility>
#include <vector>

#include "json.hpp"
#include "wpm/clip_tokenizer.hpp"

namespace wpm {

inline constexpr std::size_t kBlockContent = 75;
inline constexpr std::size_t kBlockLength = kBlockContent + 2;

// bos, content tokens, eos padding (optional), eos. bos, padding and the
// terminal eos carry weight 1.0.
struct ChunkBlock {
  std::vector<TokenId> ids;
  std::vector<double> weights;
  std::size_t content_size = 0;  // content tokens in ids[1, 1 + content_size)

  std::size_t size() const { return ids.size(); }
};

struct ChunkedPrompt {
  std::vector<ChunkBlock> blocks;
  bool padded = false;
};

struct ChunkOptions {
  bool pad_last_block = false;
  // A Break index closes the current block early.
  bool honor_breaks = true;
};

ChunkedPrompt group_tokens_and_weights(const TokenizedPrompt& tokens, const Vocabulary& vocab,
                                       const ChunkOptions& options);

// Right-pads the shorter stream with eos (weight 1.0) to equal length.
std::pair<TokenizedPrompt, TokenizedPrompt> pair_with_negative(TokenizedPrompt positive, TokenizedPrompt negative,
                                                               const Vocabulary& vocab);

// A block holding no content: bos, optional eos padding, eos.
ChunkBlock padding_block(const Vocabulary& vocab, bool padded);

// Appends padding blocks to whichever side has fewer blocks. Needed when
// honored breaks give equal-length streams different block counts.
void equalize_block_counts(ChunkedPrompt& a, ChunkedPrompt& b, const Vocabulary& vocab);

// pair_with_negative, chunking of both sides and block-count equalization.
std::pair<ChunkedPrompt, ChunkedPrompt> group_paired(TokenizedPrompt positive, TokenizedPrompt negative,
                                                     const Vocabulary& vocab, const ChunkOptions& options);

void to_json(nlohmann::json& j, const ChunkBlock& block);
void to_json(nlohmann::json& j, const ChunkedPrompt& chunks);

}  // namespace wpm
