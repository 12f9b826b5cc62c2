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

#include "httplib.h"

#include "wpm/llm_weighter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "wpm/digest.hpp"
#include "wpm/unicode.hpp"

namespace wpm {

namespace detail {
std::string_view template_resource(std::size_t index);
std::size_t template_resource_count();
}  // namespace detail

namespace {

const std::vector<WeighterTemplate>& template_table() {
  static const std::vector<WeighterTemplate> table = [] {
    if (detail::template_resource_count() != kTemplateCount) throw std::logic_error("template resources missing");
    std::vector<WeighterTemplate> t;
    for (int id = 1; id <= kTemplateCount; ++id) {
      const auto policy = id == 3 ? WeightPolicy::unconstrained() : WeightPolicy::ranged();
      t.push_back({id, detail::template_resource(static_cast<std::size_t>(id - 1)), policy});
    }
    return t;
  }();
  return table;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must be an absolute URL: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string completion_text(const std::string& body) {
  if (body.empty()) throw WeighterError(WeighterErrorKind::EmptyCompletion, "endpoint returned an empty body");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw WeighterError(WeighterErrorKind::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  const auto* content = [&]() -> const nlohmann::json* {
    if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
      return nullptr;
    const auto& choice = doc["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) return nullptr;
    const auto& message = choice["message"];
    if (!message.contains("content")) return nullptr;
    return &message["content"];
  }();
  if (content == nullptr) throw WeighterError(WeighterErrorKind::MalformedResponse, "response has no message content");
  if (content->is_null()) throw WeighterError(WeighterErrorKind::EmptyCompletion, "completion content is null");
  if (!content->is_string()) throw WeighterError(WeighterErrorKind::MalformedResponse, "content is not a string");
  auto text = content->get<std::string>();
  if (text.empty()) throw WeighterError(WeighterErrorKind::EmptyCompletion, "completion is empty");
  return text;
}

}  // namespace

const WeighterTemplate& weighter_template(int id) {
  if (id < 1 || id > kTemplateCount) {
    throw std::invalid_argument("template id must be 1.." + std::to_string(kTemplateCount) + ", got " +
                                std::to_string(id));
  }
  return template_table()[static_cast<std::size_t>(id - 1)];
}

std::string WeighterRequest::request_hash() const { return sha256_hex(payload); }

nlohmann::json WeighterRequest::body() const {
  return {{"model", model_name},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", payload}}})},
          {"temperature", temperature},
          {"max_tokens", max_tokens}};
}

WeighterRequest build_request(std::string_view poem, int template_id, const WeighterConfig& config) {
  if (poem.empty()) throw std::invalid_argument("poem must not be empty");
  const auto& tmpl = weighter_template(template_id);
  WeighterRequest req;
  req.poem = std::string(poem);
  req.template_id = template_id;
  req.model_name = config.model_name;
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  req.payload.reserve(tmpl.instruction_text.size() + 1 + poem.size());
  req.payload.append(tmpl.instruction_text).push_back('\n');
  req.payload.append(poem);
  return req;
}

HttpReply HttpChatTransport::post(const std::string& endpoint, const std::string& api_key,
                                  const WeighterRequest& request) {
  const auto url = split_url(endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
  auto res = client.Post(url.path, headers, request.body().dump(), "application/json");
  if (!res) throw TransientTransportError("request to " + endpoint + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

WeighterFixture load_fixture(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
    return {doc.at("request_hash").get<std::string>(), doc.at("response").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad fixture " + path.string() + ": " + e.what());
  }
}

FixtureTransport::FixtureTransport(std::vector<WeighterFixture> fixtures) {
  for (auto& f : fixtures) responses_[f.request_hash] = std::move(f.response);
}

std::shared_ptr<FixtureTransport> FixtureTransport::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("fixture directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<WeighterFixture> fixtures;
  for (const auto& f : files) fixtures.push_back(load_fixture(f));
  return std::make_shared<FixtureTransport>(std::move(fixtures));
}

HttpReply FixtureTransport::post(const std::string&, const std::string&, const WeighterRequest& request) {
  auto it = responses_.find(request.request_hash());
  if (it == responses_.end()) return {404, R"({"error":"no fixture for request"})"};
  nlohmann::json body = {
      {"choices", nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", it->second}}}}})}};
  return {200, body.dump()};
}

WeighterClient::WeighterClient(std::shared_ptr<ChatTransport> transport, std::string endpoint, std::string api_key,
                               RetryPolicy retry)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      retry_(retry),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (!transport_) throw std::invalid_argument("WeighterClient: transport required");
  if (retry_.max_attempts < 1) throw std::invalid_argument("WeighterClient: max_attempts must be >= 1");
}

std::string WeighterClient::api_key_from_env() {
  const char* key = std::getenv("WPM_LLM_API_KEY");
  return key ? std::string(key) : std::string();
}

std::string WeighterClient::request_weighting(const WeighterRequest& request, std::vector<AttemptRecord>* log) const {
  if (api_key_.empty()) {
    throw WeighterError(WeighterErrorKind::Authentication, "no credential: set WPM_LLM_API_KEY");
  }
  auto record = [&](int attempt, bool ok, std::string detail) {
    if (log) log->push_back({attempt, ok, std::move(detail)});
  };

  std::string last_failure;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    HttpReply reply;
    try {
      reply = transport_->post(endpoint_, api_key_, request);
    } catch (const TransientTransportError& e) {
      last_failure = e.what();
      record(attempt, false, last_failure);
      if (attempt < retry_.max_attempts) {
        const double scale = std::pow(retry_.multiplier, attempt - 1);
        sleeper_(std::chrono::milliseconds(static_cast<long long>(retry_.initial_backoff.count() * scale)));
      }
      continue;
    }

    if (reply.status == 401 || reply.status == 403) {
      record(attempt, false, "HTTP " + std::to_string(reply.status));
      throw WeighterError(WeighterErrorKind::Authentication,
                          "endpoint rejected the credential (HTTP " + std::to_string(reply.status) + ")");
    }
    if (is_transient_status(reply.status)) {
      last_failure = "HTTP " + std::to_string(reply.status);
      record(attempt, false, last_failure);
      if (attempt < retry_.max_attempts) {
        const double scale = std::pow(retry_.multiplier, attempt - 1);
        sleeper_(std::chrono::milliseconds(static_cast<long long>(retry_.initial_backoff.count() * scale)));
      }
      continue;
    }
    if (reply.status != 200) {
      record(attempt, false, "HTTP " + std::to_string(reply.status));
      throw WeighterError(WeighterErrorKind::Transport, "endpoint returned HTTP " + std::to_string(reply.status));
    }
    record(attempt, true, "HTTP 200");
    return completion_text(reply.body);
  }
  throw WeighterError(WeighterErrorKind::Transport, "request failed after " + std::to_string(retry_.max_attempts) +
                                                        " attempts: " + last_failure);
}

std::vector<std::string> WeighterClient::request_weighting_batch(std::span<const WeighterRequest> requests,
                                                                 std::size_t max_in_flight) const {
  std::vector<std::string> results(requests.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        results[i] = request_weighting(requests[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), requests.size());
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::string normalize_structure(std::string_view text) {
  std::string out;
  std::size_t newlines = 0;
  bool in_space = false;
  const auto cps = unicode::decode(text);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (cp == U'\r' || cp == U'\n') {
      if (cp == U'\r' && i + 1 < cps.size() && cps[i + 1] == U'\n') ++i;
      ++newlines;
      in_space = true;
      continue;
    }
    if (unicode::is_whitespace(cp)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.append(newlines > 0 ? std::string(newlines, '\n') : std::string(" "));
    newlines = 0;
    in_space = false;
    unicode::append_utf8(out, cp);
  }
  return out;
}

ValidationReport validate_response(std::string_view poem, std::string_view response, const WeightPolicy& policy) {
  ValidationReport report;
  const auto parsed = parse_prompt_attention(response);
  const auto lint_report = lint(parsed, policy);
  report.parse_ok = !lint_report.has_errors();
  report.structure_preserved = normalize_structure(strip_markers(parsed)) == normalize_structure(poem);
  for (const auto& d : lint_report.diagnostics) {
    if (d.severity != Severity::Warning) continue;
    report.warnings.push_back(d.message);
    if (d.message.find("outside policy ranges") != std::string::npos ||
        d.message.starts_with("non-positive weight")) {
      report.range_warnings.push_back(d.message);
    }
  }
  for (const auto& seg : parsed.segments) {
    if (!seg.is_break() && seg.weight != 1.0) ++report.weighted_word_count;
  }
  return report;
}

Lexicon lexicon_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("lexicon must be a JSON object");
  Lexicon lexicon;
  for (const auto& [word, cls] : j.items()) {
    const auto value = cls.is_string() ? cls.get<std::string>() : std::string();
    WeightClass wc;
    if (value == "emphasize") {
      wc = WeightClass::Emphasize;
    } else if (value == "deemphasize") {
      wc = WeightClass::Deemphasize;
    } else {
      throw std::invalid_argument("lexicon entry '" + word + "' must be \"emphasize\" or \"deemphasize\"");
    }
    std::vector<char32_t> lower;
    for (char32_t cp : unicode::decode(word)) unicode::append_lower(lower, cp);
    lexicon[unicode::encode(lower)] = wc;
  }
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  const auto text = read_text(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("lexicon " + path.string() + " is not JSON: " + e.what());
  }
  return lexicon_from_json(doc);
}

std::string rule_based_weighter(std::string_view poem, const Lexicon& lexicon) {
  std::vector<WeightedSegment> segments;
  std::string plain;
  const auto cps = unicode::decode(poem);
  for (std::size_t i = 0; i < cps.size();) {
    if (!unicode::is_letter(cps[i])) {
      unicode::append_utf8(plain, cps[i++]);
      continue;
    }
    std::size_t end = i;
    std::string word;
    std::vector<char32_t> lower;
    for (; end < cps.size() && unicode::is_letter(cps[end]); ++end) {
      unicode::append_utf8(word, cps[end]);
      unicode::append_lower(lower, cps[end]);
    }
    i = end;
    auto hit = lexicon.find(unicode::encode(lower));
    if (hit == lexicon.end()) {
      plain += word;
      continue;
    }
    if (!plain.empty()) segments.push_back(WeightedSegment::text_run(std::move(plain)));
    plain.clear();
    const double w = hit->second == WeightClass::Emphasize ? kRuleEmphasisWeight : kRuleDeemphasisWeight;
    segments.push_back(WeightedSegment::text_run(std::move(word), w));
  }
  if (!plain.empty()) segments.push_back(WeightedSegment::text_run(std::move(plain)));
  return serialize(segments);
}

void to_json(nlohmann::json& j, const ValidationReport& report) {
  j = {{"parse_ok", report.parse_ok},
       {"structure_preserved", report.structure_preserved},
       {"range_warnings", report.range_warnings},
       {"warnings", report.warnings},
       {"weighted_word_count", report.weighted_word_count}};
}

}  // namespace wpm
