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

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wpm/attention_grammar.hpp"

namespace wpm {

// One of the four instruction templates used to ask a chat model for a
// weighted poem. Templates 1, 2 and 4 state weight ranges; 3 does not.
struct WeighterTemplate {
  int id;
  std::string_view instruction_text;
  WeightPolicy policy;
};

inline constexpr int kTemplateCount = 4;

// Throws std::invalid_argument for ids outside 1..4.
const WeighterTemplate& weighter_template(int id);

struct WeighterConfig {
  std::string model_name = "gpt-4o-mini";
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct WeighterRequest {
  std::string poem;
  int template_id = 1;
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 0;
  std::string payload;  // instruction text, line break, poem

  // SHA-256 of the payload; keys recorded fixtures.
  std::string request_hash() const;
  // Chat-completion request body.
  nlohmann::json body() const;
};

// Throws std::invalid_argument for an empty poem or unknown template.
WeighterRequest build_request(std::string_view poem, int template_id, const WeighterConfig& config = {});

enum class WeighterErrorKind { Transport, Authentication, EmptyCompletion, MalformedResponse };

class WeighterError : public std::runtime_error {
 public:
  WeighterError(WeighterErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  WeighterErrorKind kind() const { return kind_; }

 private:
  WeighterErrorKind kind_;
};

// Raised by transports for failures worth retrying (connection, timeout).
class TransientTransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpReply {
  int status = 0;
  std::string body;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpReply post(const std::string& endpoint, const std::string& api_key, const WeighterRequest& request) = 0;
};

// POSTs the request body as JSON to a chat-completion endpoint.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
  HttpReply post(const std::string& endpoint, const std::string& api_key, const WeighterRequest& request) override;

 private:
  std::chrono::seconds timeout_;
};

// {"request_hash":"...","response":"..."}
struct WeighterFixture {
  std::string request_hash;
  std::string response;
};

WeighterFixture load_fixture(const std::filesystem::path& path);

// Replays recorded responses keyed by request hash; unknown requests get 404.
class FixtureTransport final : public ChatTransport {
 public:
  explicit FixtureTransport(std::vector<WeighterFixture> fixtures);
  // Every *.json file in the directory.
  static std::shared_ptr<FixtureTransport> from_directory(const std::filesystem::path& dir);

  HttpReply post(const std::string& endpoint, const std::string& api_key, const WeighterRequest& request) override;

 private:
  std::map<std::string, std::string> responses_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

struct AttemptRecord {
  int attempt;
  bool success;
  std::string detail;
};

class WeighterClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  WeighterClient(std::shared_ptr<ChatTransport> transport, std::string endpoint, std::string api_key,
                 RetryPolicy retry = {});

  // Reads WPM_LLM_API_KEY; empty string when unset.
  static std::string api_key_from_env();

  // Returns the completion text verbatim. Transient failures (transport
  // errors, 429, 5xx) are retried with exponential backoff.
  std::string request_weighting(const WeighterRequest& request, std::vector<AttemptRecord>* log = nullptr) const;

  // Results in request order, at most max_in_flight requests concurrently.
  std::vector<std::string> request_weighting_batch(std::span<const WeighterRequest> requests,
                                                   std::size_t max_in_flight = 4) const;

  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 private:
  std::shared_ptr<ChatTransport> transport_;
  std::string endpoint_;
  std::string api_key_;
  RetryPolicy retry_;
  Sleeper sleeper_;
};

struct ValidationReport {
  bool parse_ok = false;
  bool structure_preserved = false;
  std::vector<std::string> range_warnings;
  std::vector<std::string> warnings;  // every lint warning
  std::size_t weighted_word_count = 0;
};

// Line endings unified, whitespace runs collapsed (one space, or the run's
// line breaks), ends trimmed. Case is kept.
std::string normalize_structure(std::string_view text);

ValidationReport validate_response(std::string_view poem, std::string_view response, const WeightPolicy& policy);

enum class WeightClass { Emphasize, Deemphasize };
using Lexicon = std::map<std::string, WeightClass>;  // lowercase word -> class

inline constexpr double kRuleEmphasisWeight = 1.6;
inline constexpr double kRuleDeemphasisWeight = 0.8;

// JSON map word -> "emphasize" | "deemphasize".
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon lexicon_from_json(const nlohmann::json& j);

// Wraps every lexicon word (letter runs, matched case-insensitively) as
// (word:1.6) / (word:0.8); other text is escaped so it stays literal.
std::string rule_based_weighter(std::string_view poem, const Lexicon& lexicon);

void to_json(nlohmann::json& j, const ValidationReport& report);

}  // namespace wpm
