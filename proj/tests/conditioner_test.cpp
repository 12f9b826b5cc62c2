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
#include <cstring>

#include "test_support.hpp"
#include "wpm/conditioner.hpp"

namespace wpm {
namespace {

using testing::clip_vocab;

bool bit_equal(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

ChunkBlock block_for(const std::string& prompt) {
  const auto tokens = get_prompts_tokens_with_weights(*clip_vocab(), parse_prompt_attention(prompt));
  return group_tokens_and_weights(tokens, *clip_vocab(), ChunkOptions{.pad_last_block = true}).blocks.at(0);
}

EmbeddingMatrix mock_hidden(std::uint64_t seed = 3) {
  return MockEncoder(seed, 64, 4, clip_vocab()).encode(block_for("Gathering roses, to give to the Queen"), 0).hidden;
}

ConditioningOptions plain_scaling() {
  ConditioningOptions o;
  o.mean_norm = false;
  return o;
}

TEST(ApplyTokenWeights, IdentityIsBitExact) {
  const auto hidden = mock_hidden();
  const std::vector<double> ones(77, 1.0);
  EXPECT_TRUE(bit_equal(apply_token_weights(hidden, ones, true), hidden));
  EXPECT_TRUE(bit_equal(apply_token_weights(hidden, ones, false), hidden));
}

TEST(ApplyTokenWeights, LocalityWithoutMeanNorm) {
  const auto hidden = mock_hidden();
  std::vector<double> w(77, 1.0);
  w[4] = 2.0;
  const auto out = apply_token_weights(hidden, w, false);
  for (Eigen::Index r = 0; r < hidden.rows(); ++r) {
    if (r == 4) {
      EXPECT_TRUE((out.row(r).array() == hidden.row(r).array() * 2.0f).all());
    } else {
      EXPECT_TRUE((out.row(r).array() == hidden.row(r).array()).all()) << r;
    }
  }
}

TEST(ApplyTokenWeights, ScalarLawWithMeanNorm) {
  const auto hidden = mock_hidden();
  std::vector<double> w(77, 1.0);
  w[4] = 2.0;
  w[9] = 0.8;
  EmbeddingMatrix scaled = hidden;
  scaled.row(4) *= 2.0f;
  scaled.row(9) *= static_cast<float>(0.8);
  long double m0 = 0, m1 = 0;
  for (Eigen::Index i = 0; i < hidden.size(); ++i) {
    m0 += hidden.data()[i];
    m1 += scaled.data()[i];
  }
  const double c = static_cast<double>(m0 / m1);
  const auto out = apply_token_weights(hidden, w, true);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double want = c * scaled.data()[i];
    EXPECT_LE(std::abs(out.data()[i] - want), 1e-6 * std::max(1.0, std::abs(want))) << i;
  }
  EXPECT_NEAR(global_mean(out), global_mean(hidden), 1e-6);
}

TEST(ApplyTokenWeights, Rejections) {
  const auto hidden = mock_hidden();
  EXPECT_THROW(apply_token_weights(hidden, std::vector<double>(3, 1.0), true), std::invalid_argument);
  std::vector<double> w(77, 1.0);
  w[0] = std::nan("");
  EXPECT_THROW(apply_token_weights(hidden, w, true), std::invalid_argument);
  w[0] = INFINITY;
  EXPECT_THROW(apply_token_weights(hidden, w, false), std::invalid_argument);
}

TEST(MockEncoder, Deterministic) {
  EXPECT_TRUE(bit_equal(mock_hidden(5), mock_hidden(5)));
  EXPECT_FALSE(bit_equal(mock_hidden(5), mock_hidden(6)));
}

TEST(MockEncoder, ClipSkipSelectsLayer) {
  MockEncoder enc(1, 64, 4, clip_vocab());
  const auto b = block_for("roses");
  EXPECT_FALSE(bit_equal(enc.encode(b, 0).hidden, enc.encode(b, 1).hidden));
  EXPECT_EQ(enc.layer_for(0), 3);
  EXPECT_EQ(enc.layer_for(1), 2);
  EXPECT_EQ(enc.layer_for(10), 0);
  EXPECT_TRUE(bit_equal(enc.encode(b, 3).hidden, enc.encode(b, 9).hidden));
}

TEST(MockEncoder, PooledIsFirstEosRow) {
  MockEncoder enc(2, 16, 2, clip_vocab());
  const auto b = block_for("a red rose");
  const auto out = enc.encode(b, 0);
  const auto eos = std::find(b.ids.begin() + 1, b.ids.end(), clip_vocab()->eos_id()) - b.ids.begin();
  EXPECT_EQ(eos, 4);
  EXPECT_TRUE((out.pooled.transpose().array() == out.hidden.row(eos).array()).all());
  for (Eigen::Index i = 0; i < out.hidden.size(); ++i) EXPECT_TRUE(std::isfinite(out.hidden.data()[i]));
}

TEST(WeightedEmbeddings, EmptyPromptsAreSymmetric) {
  const EncoderList encs{make_mock_encoder(1, 64, 4, clip_vocab())};
  const auto out = get_weighted_text_embeddings(encs, "", std::nullopt, "", std::nullopt);
  EXPECT_EQ(out.prompt_embeds.rows(), 77);
  EXPECT_EQ(out.prompt_embeds.cols(), 64);
  EXPECT_TRUE(bit_equal(out.prompt_embeds, out.neg_prompt_embeds));
  EXPECT_EQ(out.block_count, 1u);
}

TEST(WeightedEmbeddings, LocalityOfExplicitWeight) {
  const EncoderList encs{make_mock_encoder(1, 64, 4, clip_vocab())};
  const auto weighted = get_weighted_text_embeddings(encs, "(roses:1.7)", std::nullopt, "", std::nullopt, plain_scaling());
  const auto plain = get_weighted_text_embeddings(encs, "roses", std::nullopt, "", std::nullopt, plain_scaling());
  ASSERT_EQ(weighted.prompt_embeds.rows(), plain.prompt_embeds.rows());
  for (Eigen::Index r = 0; r < plain.prompt_embeds.rows(); ++r) {
    if (r == 1) {
      EXPECT_TRUE((weighted.prompt_embeds.row(r).array() == plain.prompt_embeds.row(r).array() * 1.7f).all());
    } else {
      EXPECT_TRUE((weighted.prompt_embeds.row(r).array() == plain.prompt_embeds.row(r).array()).all()) << r;
    }
  }
}

TEST(WeightedEmbeddings, TwoEncoderShapes) {
  const EncoderList encs{make_mock_encoder(1, 64, 4, clip_vocab()), make_mock_encoder(2, 32, 4, clip_vocab())};
  std::string long_prompt;
  for (int i = 0; i < 100; ++i) long_prompt += "rose ";
  const auto out = get_weighted_text_embeddings(encs, long_prompt, std::nullopt, "thorn", std::nullopt);
  EXPECT_EQ(out.block_count, 2u);
  EXPECT_EQ(out.prompt_embeds.rows(), 154);
  EXPECT_EQ(out.prompt_embeds.cols(), 96);
  EXPECT_EQ(out.neg_prompt_embeds.rows(), 154);
  EXPECT_EQ(out.neg_prompt_embeds.cols(), 96);
  EXPECT_EQ(out.pooled.size(), 32);

  // Feature columns are the encoders' outputs side by side.
  const auto first = get_weighted_text_embeddings({encs[0]}, long_prompt, std::nullopt, "thorn", std::nullopt);
  EXPECT_TRUE(bit_equal(EmbeddingMatrix(out.prompt_embeds.leftCols(64)), first.prompt_embeds));
}

TEST(WeightedEmbeddings, BreakAddsBlock) {
  const EncoderList encs{make_mock_encoder(1, 8, 2, clip_vocab())};
  const auto out = get_weighted_text_embeddings(encs, "a rose BREAK a thorn", std::nullopt, "", std::nullopt);
  EXPECT_EQ(out.block_count, 2u);
  EXPECT_EQ(out.neg_prompt_embeds.rows(), 154);
  ConditioningOptions flat;
  flat.honor_breaks = false;
  EXPECT_EQ(get_weighted_text_embeddings(encs, "a rose BREAK a thorn", std::nullopt, "", std::nullopt, flat).block_count,
            1u);
}

TEST(WeightedEmbeddings, SecondPromptsAreSpaceJoined) {
  const EncoderList encs{make_mock_encoder(1, 8, 2, clip_vocab())};
  const auto joined = get_weighted_text_embeddings(encs, "a rose", std::string_view("(thorn:1.4)"), "dark",
                                                   std::string_view("night"));
  const auto direct = get_weighted_text_embeddings(encs, "a rose (thorn:1.4)", std::nullopt, "dark night", std::nullopt);
  EXPECT_TRUE(bit_equal(joined.prompt_embeds, direct.prompt_embeds));
  EXPECT_TRUE(bit_equal(joined.neg_prompt_embeds, direct.neg_prompt_embeds));
}

TEST(WeightedEmbeddings, DistinctVocabulariesMatchShared) {
  const auto other = std::make_shared<const Vocabulary>(*clip_vocab());
  const EncoderList shared{make_mock_encoder(1, 8, 2, clip_vocab()), make_mock_encoder(2, 8, 2, clip_vocab())};
  const EncoderList split{make_mock_encoder(1, 8, 2, clip_vocab()), make_mock_encoder(2, 8, 2, other)};
  const auto a = get_weighted_text_embeddings(shared, "(roses:1.7) and [thorns]", std::nullopt, "", std::nullopt);
  const auto b = get_weighted_text_embeddings(split, "(roses:1.7) and [thorns]", std::nullopt, "", std::nullopt);
  EXPECT_TRUE(bit_equal(a.prompt_embeds, b.prompt_embeds));
}

TEST(WeightedEmbeddings, ParallelMatchesSequential) {
  const EncoderList encs{make_mock_encoder(1, 16, 3, clip_vocab()), make_mock_encoder(9, 8, 3, clip_vocab())};
  std::string prompt;
  for (int i = 0; i < 120; ++i) prompt += "(rose:1.3) thorn ";
  ConditioningOptions par;
  par.parallel = true;
  const auto a = get_weighted_text_embeddings(encs, prompt, std::nullopt, "x", std::nullopt);
  const auto b = get_weighted_text_embeddings(encs, prompt, std::nullopt, "x", std::nullopt, par);
  EXPECT_GT(a.block_count, 2u);
  EXPECT_TRUE(bit_equal(a.prompt_embeds, b.prompt_embeds));
  EXPECT_TRUE(bit_equal(a.neg_prompt_embeds, b.neg_prompt_embeds));
}

TEST(WeightedEmbeddings, MetadataAndHook) {
  const EncoderList encs{make_mock_encoder(1, 8, 4, clip_vocab())};
  ConditioningOptions o;
  o.lora_scale = 0.75;
  o.clip_skip = 2;
  int calls = 0;
  o.rewrite_prompt = [&calls](std::string_view s) {
    ++calls;
    return std::string(s) + " rose";
  };
  const auto out = get_weighted_text_embeddings(encs, "a", std::nullopt, "b", std::nullopt, o);
  EXPECT_EQ(out.lora_scale, 0.75);
  EXPECT_EQ(out.clip_skip, 2);
  EXPECT_EQ(calls, 2);
  o.rewrite_prompt = nullptr;
  const auto direct = get_weighted_text_embeddings(encs, "a rose", std::nullopt, "b rose", std::nullopt, o);
  EXPECT_TRUE(bit_equal(out.prompt_embeds, direct.prompt_embeds));
}

class LyingEncoder final : public TextEncoder {
 public:
  EncoderOutput encode(const ChunkBlock& block, int) const override {
    return {EmbeddingMatrix::Zero(static_cast<Eigen::Index>(block.size()), 3), PooledVector::Zero(3)};
  }
  Eigen::Index feature_dims() const override { return 4; }
  Eigen::Index pooled_dims() const override { return 4; }
  std::shared_ptr<const Vocabulary> vocabulary() const override { return clip_vocab(); }
};

TEST(WeightedEmbeddings, ShapeMismatchIsReported) {
  const EncoderList encs{std::make_shared<LyingEncoder>()};
  EXPECT_THROW(get_weighted_text_embeddings(encs, "a", std::nullopt, "", std::nullopt), EncoderShapeError);
  EXPECT_THROW(get_weighted_text_embeddings({}, "a", std::nullopt, "", std::nullopt), std::invalid_argument);
}

}  // namespace
}  // namespace wpm
