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

#include "wpm/conditioner.hpp"

#include <algorithm>
#include <future>
#include <map>

#include "wpm/attention_grammar.hpp"

namespace wpm {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1) with 24 significant bits, exactly representable as float.
float unit_value(std::uint64_t h) { return static_cast<float>(h >> 40) * 0x1p-23f - 1.0f; }

std::string join_prompts(std::string_view first, std::optional<std::string_view> second) {
  std::string out(first);
  if (second) {
    out += ' ';
    out += *second;
  }
  return out;
}

struct BlockResult {
  EmbeddingMatrix positive;
  EmbeddingMatrix negative;
  PooledVector pooled;
  PooledVector neg_pooled;
};

EncoderOutput checked_encode(const TextEncoder& encoder, const ChunkBlock& block, int clip_skip) {
  auto out = encoder.encode(block, clip_skip);
  if (out.hidden.rows() != static_cast<Eigen::Index>(block.size()) || out.hidden.cols() != encoder.feature_dims()) {
    throw EncoderShapeError("encoder produced " + std::to_string(out.hidden.rows()) + "x" +
                            std::to_string(out.hidden.cols()) + " hidden states, declared " +
                            std::to_string(block.size()) + "x" + std::to_string(encoder.feature_dims()));
  }
  if (out.pooled.size() != encoder.pooled_dims()) {
    throw EncoderShapeError("encoder produced pooled vector of " + std::to_string(out.pooled.size()) +
                            " dims, declared " + std::to_string(encoder.pooled_dims()));
  }
  return out;
}

}  // namespace

MockEncoder::MockEncoder(std::uint64_t seed, Eigen::Index feature_dims, int layer_count,
                         std::shared_ptr<const Vocabulary> vocab)
    : seed_(seed), feature_dims_(feature_dims), layer_count_(layer_count), vocab_(std::move(vocab)) {
  if (feature_dims_ < 1) throw std::invalid_argument("MockEncoder: feature_dims must be >= 1");
  if (layer_count_ < 1) throw std::invalid_argument("MockEncoder: layer_count must be >= 1");
  if (!vocab_) throw std::invalid_argument("MockEncoder: vocabulary required");
}

int MockEncoder::layer_for(int clip_skip) const { return std::max(0, layer_count_ - 1 - clip_skip); }

EncoderOutput MockEncoder::encode(const ChunkBlock& block, int clip_skip) const {
  const auto layer = static_cast<std::uint64_t>(layer_for(clip_skip));
  const auto rows = static_cast<Eigen::Index>(block.size());
  EncoderOutput out{EmbeddingMatrix(rows, feature_dims_), PooledVector(feature_dims_)};
  for (Eigen::Index p = 0; p < rows; ++p) {
    const std::uint64_t row_key =
        mix64(mix64(mix64(seed_) ^ static_cast<std::uint64_t>(block.ids[p])) ^ static_cast<std::uint64_t>(p)) ^ layer;
    const std::uint64_t row_seed = mix64(row_key);
    for (Eigen::Index d = 0; d < feature_dims_; ++d) {
      out.hidden(p, d) = unit_value(mix64(row_seed + static_cast<std::uint64_t>(d)));
    }
  }
  Eigen::Index pooled_row = rows - 1;
  for (Eigen::Index p = 1; p < rows; ++p) {
    if (block.ids[p] == vocab_->eos_id()) {
      pooled_row = p;
      break;
    }
  }
  out.pooled = out.hidden.row(pooled_row).transpose();
  return out;
}

std::shared_ptr<TextEncoder> make_mock_encoder(std::uint64_t seed, Eigen::Index feature_dims, int layer_count,
                                               std::shared_ptr<const Vocabulary> vocab) {
  return std::make_shared<MockEncoder>(seed, feature_dims, layer_count, std::move(vocab));
}

ConditioningOutput condition_chunks(const EncoderList& encoders,
                                    const std::vector<std::pair<ChunkedPrompt, ChunkedPrompt>>& chunks,
                                    const ConditioningOptions& options) {
  if (encoders.empty()) throw std::invalid_argument("condition_chunks: at least one encoder required");
  if (chunks.size() != encoders.size()) throw std::invalid_argument("condition_chunks: one chunk pair per encoder");

  const std::size_t block_count = chunks.front().first.blocks.size();
  std::vector<Eigen::Index> row_offset{0};
  for (std::size_t b = 0; b < block_count; ++b) {
    const std::size_t length = chunks.front().first.blocks[b].size();
    for (const auto& [pos, neg] : chunks) {
      if (pos.blocks.size() != block_count || neg.blocks.size() != block_count) {
        throw std::invalid_argument("condition_chunks: block counts differ between prompts or encoders");
      }
      if (pos.blocks[b].size() != length || neg.blocks[b].size() != length) {
        throw std::invalid_argument("condition_chunks: block lengths differ at block " + std::to_string(b));
      }
    }
    row_offset.push_back(row_offset.back() + static_cast<Eigen::Index>(length));
  }

  std::vector<Eigen::Index> col_offset{0};
  for (const auto& enc : encoders) col_offset.push_back(col_offset.back() + enc->feature_dims());
  const Eigen::Index rows = row_offset.back();
  const Eigen::Index cols = col_offset.back();

  ConditioningOutput out;
  out.prompt_embeds = EmbeddingMatrix::Zero(rows, cols);
  out.neg_prompt_embeds = EmbeddingMatrix::Zero(rows, cols);
  out.block_count = block_count;
  out.clip_skip = options.clip_skip;
  out.lora_scale = options.lora_scale;

  auto run_block = [&](std::size_t b) {
    BlockResult result{EmbeddingMatrix(row_offset[b + 1] - row_offset[b], cols),
                       EmbeddingMatrix(row_offset[b + 1] - row_offset[b], cols), {}, {}};
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      const auto& enc = *encoders[e];
      const auto& pos_block = chunks[e].first.blocks[b];
      const auto& neg_block = chunks[e].second.blocks[b];
      auto pos = checked_encode(enc, pos_block, options.clip_skip);
      auto neg = checked_encode(enc, neg_block, options.clip_skip);
      result.positive.middleCols(col_offset[e], enc.feature_dims()) =
          apply_token_weights(pos.hidden, pos_block.weights, options.mean_norm);
      result.negative.middleCols(col_offset[e], enc.feature_dims()) =
          apply_token_weights(neg.hidden, neg_block.weights, options.mean_norm);
      result.pooled = std::move(pos.pooled);
      result.neg_pooled = std::move(neg.pooled);
    }
    return result;
  };

  std::vector<BlockResult> results;
  results.reserve(block_count);
  if (options.parallel && block_count > 1) {
    std::vector<std::future<BlockResult>> pending;
    for (std::size_t b = 0; b < block_count; ++b) pending.push_back(std::async(std::launch::async, run_block, b));
    for (auto& f : pending) results.push_back(f.get());
  } else {
    for (std::size_t b = 0; b < block_count; ++b) results.push_back(run_block(b));
  }

  for (std::size_t b = 0; b < block_count; ++b) {
    const Eigen::Index n = row_offset[b + 1] - row_offset[b];
    out.prompt_embeds.middleRows(row_offset[b], n) = results[b].positive;
    out.neg_prompt_embeds.middleRows(row_offset[b], n) = results[b].negative;
  }
  if (block_count > 0) {
    out.pooled = results.front().pooled;
    out.neg_pooled = results.front().neg_pooled;
  }
  return out;
}

ConditioningOutput get_weighted_text_embeddings(const EncoderList& encoders, std::string_view prompt,
                                                std::optional<std::string_view> prompt_2, std::string_view neg_prompt,
                                                std::optional<std::string_view> neg_prompt_2,
                                                const ConditioningOptions& options) {
  if (encoders.empty()) throw std::invalid_argument("get_weighted_text_embeddings: at least one encoder required");

  std::string positive_text = join_prompts(prompt, prompt_2);
  std::string negative_text = join_prompts(neg_prompt, neg_prompt_2);
  if (options.rewrite_prompt) {
    positive_text = options.rewrite_prompt(positive_text);
    negative_text = options.rewrite_prompt(negative_text);
  }
  const auto positive = parse_prompt_attention(positive_text);
  const auto negative = parse_prompt_attention(negative_text);

  // Tokenize once per distinct vocabulary.
  const ChunkOptions chunking{.pad_last_block = true, .honor_breaks = options.honor_breaks};
  std::map<const Vocabulary*, std::pair<ChunkedPrompt, ChunkedPrompt>> by_vocab;
  for (const auto& enc : encoders) {
    const auto vocab = enc->vocabulary();
    if (!vocab) throw std::invalid_argument("get_weighted_text_embeddings: encoder without vocabulary");
    if (by_vocab.contains(vocab.get())) continue;
    by_vocab.emplace(vocab.get(), group_paired(get_prompts_tokens_with_weights(*vocab, positive),
                                               get_prompts_tokens_with_weights(*vocab, negative), *vocab, chunking));
  }

  std::size_t block_count = 0;
  for (const auto& [vocab, pair] : by_vocab) block_count = std::max(block_count, pair.first.blocks.size());
  for (auto& [vocab, pair] : by_vocab) {
    while (pair.first.blocks.size() < block_count) pair.first.blocks.push_back(padding_block(*vocab, true));
    while (pair.second.blocks.size() < block_count) pair.second.blocks.push_back(padding_block(*vocab, true));
  }

  std::vector<std::pair<ChunkedPrompt, ChunkedPrompt>> chunks;
  chunks.reserve(encoders.size());
  for (const auto& enc : encoders) chunks.push_back(by_vocab.at(enc->vocabulary().get()));
  return condition_chunks(encoders, chunks, options);
}

}  // namespace wpm
