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
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wpm/attention_grammar.hpp"

namespace wpm {

using TokenId = int;

enum class LoadErrorKind {
  MissingFile,
  MalformedJson,
  DuplicateId,
  MalformedMerge,
  MissingMergeResult,
  MissingSpecialToken,
};

class LoadError : public std::runtime_error {
 public:
  LoadError(LoadErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  LoadErrorKind kind() const { return kind_; }

 private:
  LoadErrorKind kind_;
};

// A subword missing from the vocabulary after merging; only a corrupted
// vocabulary produces one.
class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Byte-level BPE vocabulary in the CLIP layout. Immutable after construction
// and safe to share between threads.
class Vocabulary {
 public:
  static constexpr std::size_t kContextLength = 77;

  // vocab_file: JSON object subword -> id. merges_file: one "left right" pair
  // per line, highest priority first, optional leading "#" header line.
  static Vocabulary load(const std::filesystem::path& vocab_file, const std::filesystem::path& merges_file);

  static Vocabulary from_tables(std::unordered_map<std::string, TokenId> token_to_id,
                                const std::vector<std::pair<std::string, std::string>>& merges);

  std::optional<TokenId> id_of(std::string_view token) const;
  const std::string& token_of(TokenId id) const;
  std::optional<std::size_t> merge_rank(std::string_view left, std::string_view right) const;

  TokenId bos_id() const { return bos_id_; }
  TokenId eos_id() const { return eos_id_; }
  std::size_t size() const { return token_to_id_.size(); }
  std::size_t merge_count() const { return merge_ranks_.size(); }
  std::size_t context_length() const { return kContextLength; }

 private:
  Vocabulary() = default;

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::unordered_map<TokenId, std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> merge_ranks_;  // key: left + ' ' + right
  TokenId bos_id_ = -1;
  TokenId eos_id_ = -1;
};

// Maps each byte to the printable code point used by the BPE alphabet.
char32_t byte_to_unicode(unsigned char byte);
std::optional<unsigned char> unicode_to_byte(char32_t cp);

// Lowercased, whitespace-collapsed text, split by the CLIP word pattern.
std::vector<std::string> pre_tokenize(std::string_view text);

// BPE applied to one pre-tokenized word; the last unit carries "</w>".
std::vector<std::string> bpe_word(const Vocabulary& vocab, std::string_view word);

// Ids only: no bos/eos, no truncation.
std::vector<TokenId> encode_text(const Vocabulary& vocab, std::string_view text);

// Inverse of the byte alphabet for one vocabulary entry, "</w>" dropped.
std::string decode_token(const Vocabulary& vocab, TokenId id);

inline constexpr std::size_t kNoSegment = static_cast<std::size_t>(-1);

struct TokenizedPrompt {
  std::vector<TokenId> ids;
  std::vector<double> weights;
  std::vector<std::size_t> breaks;      // indices into ids
  std::vector<std::size_t> provenance;  // segment index, kNoSegment for padding

  std::size_t size() const { return ids.size(); }
};

TokenizedPrompt get_prompts_tokens_with_weights(const Vocabulary& vocab, const ParsedPrompt& prompt);

void to_json(nlohmann::json& j, const TokenizedPrompt& tokens);

}  // namespace wpm
