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

#include "wpm/clip_tokenizer.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include "wpm/unicode.hpp"

namespace wpm {

namespace {

constexpr std::string_view kEndOfWord = "</w>";

struct ByteAlphabet {
  std::array<char32_t, 256> forward{};
  std::unordered_map<char32_t, unsigned char> backward;

  ByteAlphabet() {
    std::array<bool, 256> printable{};
    for (int b = '!'; b <= '~'; ++b) printable[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      forward[b] = printable[b] ? static_cast<char32_t>(b) : next++;
      backward[forward[b]] = static_cast<unsigned char>(b);
    }
  }
};

const ByteAlphabet& byte_alphabet() {
  static const ByteAlphabet alphabet;
  return alphabet;
}

std::string merge_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left).push_back(' ');
  key.append(right);
  return key;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadErrorKind::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_contraction_letter(char32_t cp) {
  return cp == U's' || cp == U't' || cp == U'r' || cp == U'v' || cp == U'm' || cp == U'l' || cp == U'd';
}

// Length of the contraction suffix at cps[i] == '\'' ('s 't 're 've 'm 'll 'd), or 0.
std::size_t match_contraction(const std::vector<char32_t>& cps, std::size_t i) {
  if (i + 1 >= cps.size() || !is_contraction_letter(cps[i + 1])) return 0;
  const char32_t a = cps[i + 1];
  const char32_t b = i + 2 < cps.size() ? cps[i + 2] : 0;
  if (a == U's' || a == U't' || a == U'm' || a == U'd') return 2;
  if ((a == U'r' || a == U'v') && b == U'e') return 3;
  if (a == U'l' && b == U'l') return 3;
  return 0;
}

}  // namespace

char32_t byte_to_unicode(unsigned char byte) { return byte_alphabet().forward[byte]; }

std::optional<unsigned char> unicode_to_byte(char32_t cp) {
  const auto& back = byte_alphabet().backward;
  auto it = back.find(cp);
  if (it == back.end()) return std::nullopt;
  return it->second;
}

Vocabulary Vocabulary::from_tables(std::unordered_map<std::string, TokenId> token_to_id,
                                   const std::vector<std::pair<std::string, std::string>>& merges) {
  Vocabulary vocab;
  for (const auto& [token, id] : token_to_id) {
    auto [it, inserted] = vocab.id_to_token_.emplace(id, token);
    if (!inserted) {
      throw LoadError(LoadErrorKind::DuplicateId, "id " + std::to_string(id) + " is assigned to both '" + it->second +
                                                      "' and '" + token + "'");
    }
  }
  vocab.token_to_id_ = std::move(token_to_id);

  for (std::size_t rank = 0; rank < merges.size(); ++rank) {
    const auto& [left, right] = merges[rank];
    if (!vocab.token_to_id_.contains(left + right)) {
      throw LoadError(LoadErrorKind::MissingMergeResult,
                      "merge '" + left + " " + right + "' produces a token absent from the vocabulary");
    }
    vocab.merge_ranks_.try_emplace(merge_key(left, right), rank);
  }

  auto special = [&](std::initializer_list<std::string_view> names) -> TokenId {
    for (auto name : names) {
      if (auto id = vocab.id_of(name)) return *id;
    }
    throw LoadError(LoadErrorKind::MissingSpecialToken, "vocabulary lacks special token " + std::string(*names.begin()));
  };
  vocab.bos_id_ = special({"<|startoftext|>", "<start_of_text>"});
  vocab.eos_id_ = special({"<|endoftext|>", "<end_of_text>"});
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& vocab_file, const std::filesystem::path& merges_file) {
  const std::string vocab_text = read_file(vocab_file);
  const std::string merges_text = read_file(merges_file);

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(vocab_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(LoadErrorKind::MalformedJson, vocab_file.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw LoadError(LoadErrorKind::MalformedJson, vocab_file.string() + ": expected an object");

  std::unordered_map<std::string, TokenId> token_to_id;
  token_to_id.reserve(doc.size());
  for (const auto& [token, id] : doc.items()) {
    if (!id.is_number_integer() || id.get<long long>() < 0 ||
        id.get<long long>() > std::numeric_limits<TokenId>::max()) {
      throw LoadError(LoadErrorKind::MalformedJson, vocab_file.string() + ": id of '" + token + "' is not a valid id");
    }
    token_to_id.emplace(token, id.get<TokenId>());
  }

  std::vector<std::pair<std::string, std::string>> merges;
  std::istringstream lines(merges_text);
  std::string line;
  for (std::size_t line_no = 1; std::getline(lines, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with('#')) continue;
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw LoadError(LoadErrorKind::MalformedMerge,
                      merges_file.string() + ":" + std::to_string(line_no) + ": expected 'left right'");
    }
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return from_tables(std::move(token_to_id), merges);
}

std::optional<TokenId> Vocabulary::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  auto it = id_to_token_.find(id);
  if (it == id_to_token_.end()) throw std::out_of_range("unknown token id " + std::to_string(id));
  return it->second;
}

std::optional<std::size_t> Vocabulary::merge_rank(std::string_view left, std::string_view right) const {
  auto it = merge_ranks_.find(merge_key(left, right));
  if (it == merge_ranks_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> pre_tokenize(std::string_view text) {
  // Collapse whitespace runs to one space, trim, lowercase.
  std::vector<char32_t> cps;
  bool pending_space = false;
  for (char32_t cp : unicode::decode(text)) {
    if (unicode::is_whitespace(cp)) {
      pending_space = !cps.empty();
      continue;
    }
    if (pending_space) cps.push_back(U' ');
    pending_space = false;
    unicode::append_lower(cps, cp);
  }

  // 's|'t|'re|'ve|'m|'ll|'d|\p{L}+|\p{N}|[^\s\p{L}\p{N}]+
  std::vector<std::string> words;
  const std::size_t n = cps.size();
  auto emit = [&](std::size_t begin, std::size_t end) {
    std::string w;
    for (std::size_t i = begin; i < end; ++i) unicode::append_utf8(w, cps[i]);
    words.push_back(std::move(w));
  };
  std::size_t i = 0;
  while (i < n) {
    const char32_t cp = cps[i];
    if (cp == U'\'') {
      if (const auto len = match_contraction(cps, i)) {
        emit(i, i + len);
        i += len;
        continue;
      }
    }
    if (unicode::is_letter(cp)) {
      std::size_t end = i + 1;
      while (end < n && unicode::is_letter(cps[end])) ++end;
      emit(i, end);
      i = end;
    } else if (unicode::is_number(cp)) {
      emit(i, i + 1);
      ++i;
    } else if (unicode::is_whitespace(cp)) {
      ++i;
    } else {
      std::size_t end = i + 1;
      while (end < n && !unicode::is_whitespace(cps[end]) && !unicode::is_letter(cps[end]) &&
             !unicode::is_number(cps[end]))
        ++end;
      emit(i, end);
      i = end;
    }
  }
  return words;
}

std::vector<std::string> bpe_word(const Vocabulary& vocab, std::string_view word) {
  std::vector<std::string> units;
  units.reserve(word.size());
  for (unsigned char b : word) {
    std::string unit;
    unicode::append_utf8(unit, byte_to_unicode(b));
    units.push_back(std::move(unit));
  }
  if (units.empty()) return units;
  units.back() += kEndOfWord;

  while (units.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best = units.size();
    for (std::size_t k = 0; k + 1 < units.size(); ++k) {
      if (auto rank = vocab.merge_rank(units[k], units[k + 1]); rank && *rank < best_rank) {
        best_rank = *rank;
        best = k;
      }
    }
    if (best == units.size()) break;

    // Merge every non-overlapping occurrence of the winning pair, left to right.
    const std::string first = units[best];
    const std::string second = units[best + 1];
    std::vector<std::string> merged;
    merged.reserve(units.size());
    for (std::size_t k = 0; k < units.size();) {
      if (k + 1 < units.size() && units[k] == first && units[k + 1] == second) {
        merged.push_back(first + second);
        k += 2;
      } else {
        merged.push_back(std::move(units[k]));
        ++k;
      }
    }
    units = std::move(merged);
  }
  return units;
}

std::vector<TokenId> encode_text(const Vocabulary& vocab, std::string_view text) {
  std::vector<TokenId> ids;
  for (const auto& word : pre_tokenize(text)) {
    for (const auto& unit : bpe_word(vocab, word)) {
      auto id = vocab.id_of(unit);
      if (!id) throw EncodeError("subword '" + unit + "' of '" + word + "' is not in the vocabulary");
      ids.push_back(*id);
    }
  }
  return ids;
}

std::string decode_token(const Vocabulary& vocab, TokenId id) {
  std::string_view token = vocab.token_of(id);
  if (token.ends_with(kEndOfWord)) token.remove_suffix(kEndOfWord.size());
  std::string out;
  for (char32_t cp : unicode::decode(token)) {
    if (auto b = unicode_to_byte(cp)) {
      out.push_back(static_cast<char>(*b));
    } else {
      unicode::append_utf8(out, cp);
    }
  }
  return out;
}

TokenizedPrompt get_prompts_tokens_with_weights(const Vocabulary& vocab, const ParsedPrompt& prompt) {
  TokenizedPrompt out;
  for (std::size_t s = 0; s < prompt.segments.size(); ++s) {
    const auto& seg = prompt.segments[s];
    if (seg.is_break()) {
      out.breaks.push_back(out.ids.size());
      continue;
    }
    const auto ids = encode_text(vocab, seg.text);
    out.ids.insert(out.ids.end(), ids.begin(), ids.end());
    out.weights.insert(out.weights.end(), ids.size(), seg.weight);
    out.provenance.insert(out.provenance.end(), ids.size(), s);
  }
  return out;
}

void to_json(nlohmann::json& j, const TokenizedPrompt& tokens) {
  j = {{"ids", tokens.ids}, {"weights", tokens.weights}, {"breaks", tokens.breaks}};
}

}  // namespace wpm
