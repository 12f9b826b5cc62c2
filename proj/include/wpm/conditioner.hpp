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

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wpm/chunker.hpp"
#include "wpm/clip_tokenizer.hpp"

namespace wpm {

template <typename Scalar>
using EmbeddingMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using EmbeddingVectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Rows are token positions, columns feature dims.
using EmbeddingMatrix = EmbeddingMatrixT<float>;
using PooledVector = EmbeddingVectorT<float>;

class EncoderShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mean of all entries, accumulated in double in row-major order so the result
// does not depend on SIMD width.
template <typename Derived>
double global_mean(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) sum += static_cast<double>(m(r, c));
  return sum / static_cast<double>(m.size());
}

// Scales row i by weights[i]. With mean_norm the result is rescaled so its
// global mean equals the input's (skipped when the scaled mean is ~0).
template <typename Derived>
EmbeddingMatrixT<typename Derived::Scalar> apply_token_weights(const Eigen::MatrixBase<Derived>& hidden,
                                                               std::span<const double> weights, bool mean_norm) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<Eigen::Index>(weights.size()) != hidden.rows()) {
    throw std::invalid_argument("apply_token_weights: " + std::to_string(weights.size()) + " weights for " +
                                std::to_string(hidden.rows()) + " rows");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("apply_token_weights: non-finite weight");
  }

  EmbeddingMatrixT<Scalar> out = hidden;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (weights[r] != 1.0) out.row(r) *= static_cast<Scalar>(weights[r]);
  }
  if (mean_norm) {
    const double before = global_mean(hidden);
    const double after = global_mean(out);
    if (std::abs(after) >= 1e-12 && before != after) out *= static_cast<Scalar>(before / after);
  }
  return out;
}

struct EncoderOutput {
  EmbeddingMatrix hidden;
  PooledVector pooled;
};

// A text encoder for one 77-token block. clip_skip = 0 selects the final
// hidden layer, k the k-th layer before it.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;

  virtual EncoderOutput encode(const ChunkBlock& block, int clip_skip) const = 0;
  virtual Eigen::Index feature_dims() const = 0;
  virtual Eigen::Index pooled_dims() const = 0;
  virtual std::shared_ptr<const Vocabulary> vocabulary() const = 0;
};

// Deterministic test double: the hidden row for token t at position p in
// layer L is a pseudorandom function of (seed, t, p, L); pooled is the row at
// the first eos after bos.
class MockEncoder final : public TextEncoder {
 public:
  MockEncoder(std::uint64_t seed, Eigen::Index feature_dims, int layer_count, std::shared_ptr<const Vocabulary> vocab);

  EncoderOutput encode(const ChunkBlock& block, int clip_skip) const override;
  Eigen::Index feature_dims() const override { return feature_dims_; }
  Eigen::Index pooled_dims() const override { return feature_dims_; }
  std::shared_ptr<const Vocabulary> vocabulary() const override { return vocab_; }

  int layer_for(int clip_skip) const;
  int layer_count() const { return layer_count_; }

 private:
  std::uint64_t seed_;
  Eigen::Index feature_dims_;
  int layer_count_;
  std::shared_ptr<const Vocabulary> vocab_;
};

std::shared_ptr<TextEncoder> make_mock_encoder(std::uint64_t seed, Eigen::Index feature_dims, int layer_count,
                                               std::shared_ptr<const Vocabulary> vocab);

struct ConditioningOptions {
  int clip_skip = 0;
  bool mean_norm = true;
  bool honor_breaks = true;
  double lora_scale = 1.0;  // carried to the output, never applied
  bool parallel = false;    // encode blocks concurrently
  // Pre-tokenization rewrite (textual-inversion expansion). Unset by default.
  std::function<std::string(std::string_view)> rewrite_prompt;
};

struct ConditioningOutput {
  EmbeddingMatrix prompt_embeds;
  EmbeddingMatrix neg_prompt_embeds;
  PooledVector pooled;
  PooledVector neg_pooled;
  std::size_t block_count = 0;
  int clip_skip = 0;
  double lora_scale = 1.0;
};

using EncoderList = std::vector<std::shared_ptr<const TextEncoder>>;

// Chunks already paired per encoder: chunks[e] = {positive, negative} for
// encoders[e]. All entries must have the same block count.
ConditioningOutput condition_chunks(const EncoderList& encoders,
                                    const std::vector<std::pair<ChunkedPrompt, ChunkedPrompt>>& chunks,
                                    const ConditioningOptions& options);

// Full pipeline: join prompt_2, parse, tokenize per distinct vocabulary, pair
// with the negative, chunk with padding, encode, weight and stack.
ConditioningOutput get_weighted_text_embeddings(const EncoderList& encoders, std::string_view prompt,
                                                std::optional<std::string_view> prompt_2, std::string_view neg_prompt,
                                                std::optional<std::string_view> neg_prompt_2,
                                                const ConditioningOptions& options = {});

}  // namespace wpm
