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

#include "wpm/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wpm/attention_grammar.hpp"
#include "wpm/chunker.hpp"
#include "wpm/clip_tokenizer.hpp"
#include "wpm/conditioner.hpp"
#include "wpm/digest.hpp"
#include "wpm/embedding_io.hpp"
#include "wpm/heatmap.hpp"
#include "wpm/llm_weighter.hpp"

namespace wpm::cli {

namespace {

using nlohmann::json;

struct Failure {
  int code;
  std::string message;
};

struct InputArgs {
  std::string text;
  std::string file;
  bool has_text = false;
};

struct VocabArgs {
  std::string vocab = WPM_DEFAULT_DATA_DIR "/clip/vocab.json";
  std::string merges = WPM_DEFAULT_DATA_DIR "/clip/merges.txt";
};

struct CompileArgs {
  std::string neg;
  std::optional<std::string> prompt_2;
  std::optional<std::string> neg_2;
  bool pad_last_block = true;
  int clip_skip = 0;
  bool no_mean_norm = false;
  bool no_breaks = false;
  std::string weighter = "none";
  std::optional<int> template_id;
  std::string lexicon;
  std::string endpoint;
  std::string model = "gpt-4o-mini";
  std::string fixtures;
  bool embed = false;
  std::uint64_t mock_seed = 0;
  std::vector<int> mock_dims{64};
  int mock_layers = 4;
  double lora_scale = 1.0;
  std::string out;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitIo, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw Failure{kExitIo, "cannot write " + path};
  }
}

std::string read_input(const InputArgs& in) {
  if (!in.file.empty()) return read_file(in.file);
  if (in.has_text) return in.text;
  std::ostringstream ss;
  ss << std::cin.rdbuf();
  return ss.str();
}

std::shared_ptr<const Vocabulary> load_vocab(const VocabArgs& v) {
  try {
    return std::make_shared<const Vocabulary>(Vocabulary::load(v.vocab, v.merges));
  } catch (const LoadError& e) {
    throw Failure{kExitIo, e.what()};
  }
}

std::string dump(const json& j, bool pretty) {
  return j.dump(pretty ? 2 : -1, ' ', false, json::error_handler_t::replace) + "\n";
}

void add_input(CLI::App* cmd, InputArgs& in) {
  cmd->add_option("text", in.text, "Prompt text (reads standard input when neither text nor --file is given)")
      ->each([&in](const std::string&) { in.has_text = true; });
  cmd->add_option("--file", in.file, "Read the prompt from a file");
}

void add_vocab(CLI::App* cmd, VocabArgs& v) {
  cmd->add_option("--vocab", v.vocab, "Vocabulary JSON")->capture_default_str();
  cmd->add_option("--merges", v.merges, "BPE merges file")->capture_default_str();
}

TokenizedPrompt tokenize(const Vocabulary& vocab, const ParsedPrompt& prompt) {
  try {
    return get_prompts_tokens_with_weights(vocab, prompt);
  } catch (const EncodeError& e) {
    throw Failure{kExitValidation, e.what()};
  }
}

json weighted_segments_json(const ParsedPrompt& prompt) {
  auto out = json::array();
  for (const auto& seg : prompt.segments) {
    if (!seg.is_break() && seg.weight != 1.0) out.push_back({{"text", seg.text}, {"weight", seg.weight}});
  }
  return out;
}

// Runs the configured weighter; returns the weighted poem and its report.
std::pair<std::string, json> run_weighter(const std::string& poem, const CompileArgs& c, std::ostream& err) {
  if (c.weighter == "none") return {poem, nullptr};

  if (c.weighter == "rules") {
    if (c.lexicon.empty()) throw Failure{kExitValidation, "--weighter rules requires --lexicon"};
    Lexicon lexicon;
    const auto text = read_file(c.lexicon);
    try {
      lexicon = lexicon_from_json(json::parse(text));
    } catch (const std::exception& e) {
      throw Failure{kExitValidation, std::string("invalid lexicon: ") + e.what()};
    }
    auto weighted = rule_based_weighter(poem, lexicon);
    const auto report = validate_response(poem, weighted, WeightPolicy::ranged());
    return {weighted, report};
  }

  // llm
  if (!c.template_id) throw Failure{kExitValidation, "--weighter llm requires --template"};
  WeighterRequest request;
  try {
    request = build_request(poem, *c.template_id, WeighterConfig{c.model, 0.0, 1024});
  } catch (const std::invalid_argument& e) {
    throw Failure{kExitValidation, e.what()};
  }

  std::shared_ptr<ChatTransport> transport;
  std::string endpoint = c.endpoint;
  std::string key = WeighterClient::api_key_from_env();
  if (!c.fixtures.empty()) {
    try {
      transport = FixtureTransport::from_directory(c.fixtures);
    } catch (const std::exception& e) {
      throw Failure{kExitIo, e.what()};
    }
    if (endpoint.empty()) endpoint = "fixture://replay";
    if (key.empty()) key = "fixture";
  } else {
    if (endpoint.empty()) throw Failure{kExitValidation, "--weighter llm requires --endpoint or --fixtures"};
    transport = std::make_shared<HttpChatTransport>();
  }

  std::string weighted;
  try {
    WeighterClient client(transport, endpoint, key);
    std::vector<AttemptRecord> attempts;
    weighted = client.request_weighting(request, &attempts);
    for (const auto& a : attempts) err << "llm attempt " << a.attempt << ": " << a.detail << "\n";
  } catch (const WeighterError& e) {
    throw Failure{kExitTransport, e.what()};
  } catch (const std::invalid_argument& e) {
    throw Failure{kExitValidation, e.what()};
  }

  const auto& tmpl = weighter_template(*c.template_id);
  const auto report = validate_response(poem, weighted, tmpl.policy);
  if (!report.structure_preserved) err << "warning: weighted poem does not preserve the original structure\n";
  for (const auto& w : report.range_warnings) err << "warning: " << w << "\n";
  json j = report;
  j["template_id"] = *c.template_id;
  j["request_hash"] = request.request_hash();
  return {weighted, j};
}

json config_echo(const VocabArgs& v, const CompileArgs& c) {
  json j = {{"vocab", v.vocab},
            {"merges", v.merges},
            {"pad_last_block", c.pad_last_block},
            {"clip_skip", c.clip_skip},
            {"mean_norm", !c.no_mean_norm},
            {"honor_breaks", !c.no_breaks},
            {"weighter", c.weighter},
            {"template_id", c.template_id ? json(*c.template_id) : json(nullptr)},
            {"lexicon", c.lexicon},
            {"neg", c.neg},
            {"prompt_2", c.prompt_2 ? json(*c.prompt_2) : json(nullptr)},
            {"neg_2", c.neg_2 ? json(*c.neg_2) : json(nullptr)},
            {"embed", c.embed},
            {"mock_seed", c.mock_seed},
            {"mock_dims", c.mock_dims},
            {"mock_layers", c.mock_layers},
            {"lora_scale", c.lora_scale},
            {"out", c.out},
            {"output_format", c.embed ? "binary" : "json"}};
  if (c.weighter == "llm") {
    j["endpoint"] = c.endpoint;
    j["model"] = c.model;
    j["fixtures"] = c.fixtures;
  }
  return j;
}

int cmd_compile(const InputArgs& in, const VocabArgs& v, const CompileArgs& c, bool pretty, std::ostream& out,
                std::ostream& err) {
  if (c.clip_skip < 0) throw Failure{kExitValidation, "--clip-skip must be >= 0"};
  if (c.embed && c.out.empty()) throw Failure{kExitValidation, "--embed requires --out"};
  if (c.weighter == "llm" && !c.template_id) throw Failure{kExitValidation, "--weighter llm requires --template"};
  for (int d : c.mock_dims)
    if (d < 1) throw Failure{kExitValidation, "--mock-dims entries must be >= 1"};

  const std::string poem = read_input(in);
  const auto vocab = load_vocab(v);
  auto [weighted, validation] = run_weighter(poem, c, err);

  std::string positive_text = weighted;
  if (c.prompt_2) positive_text += " " + *c.prompt_2;
  std::string negative_text = c.neg;
  if (c.neg_2) negative_text += " " + *c.neg_2;

  const auto positive = parse_prompt_attention(positive_text);
  const auto negative = parse_prompt_attention(negative_text);
  const ChunkOptions chunking{.pad_last_block = c.pad_last_block, .honor_breaks = !c.no_breaks};
  auto [pos_chunks, neg_chunks] =
      group_paired(tokenize(*vocab, positive), tokenize(*vocab, negative), *vocab, chunking);

  json result = {{"config", config_echo(v, c)},
                 {"weighted_prompt", weighted},
                 {"weighted_segments", weighted_segments_json(positive)},
                 {"parsed", positive},
                 {"chunks", pos_chunks},
                 {"negative_chunks", neg_chunks}};
  if (!validation.is_null()) result["validation"] = validation;

  if (c.embed) {
    EncoderList encoders;
    for (std::size_t e = 0; e < c.mock_dims.size(); ++e) {
      encoders.push_back(make_mock_encoder(c.mock_seed + e, c.mock_dims[e], c.mock_layers, vocab));
    }
    ConditioningOptions options;
    options.clip_skip = c.clip_skip;
    options.mean_norm = !c.no_mean_norm;
    options.honor_breaks = !c.no_breaks;
    options.lora_scale = c.lora_scale;
    const auto cond = get_weighted_text_embeddings(encoders, weighted, c.prompt_2, c.neg, c.neg_2, options);

    const auto pos_bytes = encode_wpme(cond.prompt_embeds);
    const auto neg_bytes = encode_wpme(cond.neg_prompt_embeds);
    json sidecar = wpme_sidecar(cond.pooled, cond.lora_scale, cond.clip_skip);
    sidecar["neg_pooled"] = wpme_sidecar(cond.neg_pooled, cond.lora_scale, cond.clip_skip)["pooled"];
    write_file(c.out, pos_bytes);
    write_file(c.out + ".neg", neg_bytes);
    write_file(c.out + ".json", sidecar.dump(2) + "\n");
    result["embedding"] = {{"path", c.out},
                           {"neg_path", c.out + ".neg"},
                           {"sidecar_path", c.out + ".json"},
                           {"rows", cond.prompt_embeds.rows()},
                           {"cols", cond.prompt_embeds.cols()},
                           {"blocks", cond.block_count},
                           {"sha256", sha256_hex(pos_bytes)},
                           {"neg_sha256", sha256_hex(neg_bytes)}};
  }
  out << dump(result, pretty);
  return kExitOk;
}

int cmd_heatmap(const InputArgs& in, const VocabArgs& v, bool svg, bool pretty, const std::string& out_path,
                std::ostream& out) {
  const auto text = read_input(in);
  const auto vocab = load_vocab(v);
  const auto rows = token_heatmap(*vocab, tokenize(*vocab, parse_prompt_attention(text)));
  if (svg) {
    const auto doc = render_heatmap_svg(rows);
    if (out_path.empty()) {
      out << doc;
    } else {
      write_file(out_path, doc);
    }
    return kExitOk;
  }
  if (pretty) {
    out << render_heatmap_table(rows);
  } else {
    out << dump(json{{"tokens", rows}}, false);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"wpm: weighted prompt compiler for poem-to-image conditioning", "wpm"};
  app.require_subcommand(1);

  bool pretty = false;
  InputArgs input;
  VocabArgs vocab_args;
  CompileArgs compile_args;
  int lint_template = 1;
  bool svg = false;
  std::string heatmap_out;

  auto* parse_cmd = app.add_subcommand("parse", "Parse attention markers into weighted segments");
  add_input(parse_cmd, input);
  parse_cmd->add_flag("--pretty", pretty, "Indent JSON output");

  auto* tokenize_cmd = app.add_subcommand("tokenize", "Tokenize a weighted prompt");
  add_input(tokenize_cmd, input);
  add_vocab(tokenize_cmd, vocab_args);
  tokenize_cmd->add_flag("--pretty", pretty, "Indent JSON output");

  auto* lint_cmd = app.add_subcommand("lint", "Check a weighted prompt against a template's weight policy");
  add_input(lint_cmd, input);
  lint_cmd->add_option("--template", lint_template, "Template id")->check(CLI::Range(1, kTemplateCount));
  lint_cmd->add_flag("--pretty", pretty, "Indent JSON output");

  auto* heatmap_cmd = app.add_subcommand("heatmap", "Per-token weight visualization");
  add_input(heatmap_cmd, input);
  add_vocab(heatmap_cmd, vocab_args);
  heatmap_cmd->add_flag("--svg", svg, "Emit an SVG bar strip");
  heatmap_cmd->add_flag("--pretty", pretty, "Print an aligned text table");
  heatmap_cmd->add_option("--out", heatmap_out, "Write the SVG to a file");

  auto* compile_cmd = app.add_subcommand("compile", "Poem to weighted token blocks and embeddings");
  auto& c = compile_args;
  add_input(compile_cmd, input);
  add_vocab(compile_cmd, vocab_args);
  compile_cmd->add_option("--neg", c.neg, "Negative prompt");
  compile_cmd->add_option("--prompt-2", c.prompt_2, "Second prompt, space-joined to the first");
  compile_cmd->add_option("--neg-2", c.neg_2, "Second negative prompt");
  compile_cmd->add_flag("--pad-last-block,!--no-pad-last-block", c.pad_last_block, "Pad the final block to 77");
  compile_cmd->add_option("--clip-skip", c.clip_skip, "Encoder layers to step back from the last");
  compile_cmd->add_flag("--no-mean-norm", c.no_mean_norm, "Plain row scaling without mean restoration");
  compile_cmd->add_flag("--no-breaks", c.no_breaks, "Ignore BREAK when chunking");
  compile_cmd->add_option("--weighter", c.weighter, "Weighting stage")
      ->check(CLI::IsMember({"llm", "rules", "none"}));
  compile_cmd->add_option("--template", c.template_id, "Instruction template for --weighter llm")
      ->check(CLI::Range(1, kTemplateCount));
  compile_cmd->add_option("--lexicon", c.lexicon, "Lexicon JSON for --weighter rules");
  compile_cmd->add_option("--endpoint", c.endpoint, "Chat-completion endpoint URL");
  compile_cmd->add_option("--model", c.model, "Model name")->capture_default_str();
  compile_cmd->add_option("--fixtures", c.fixtures, "Replay recorded responses from a directory");
  compile_cmd->add_flag("--embed", c.embed, "Compute weighted embeddings");
  compile_cmd->add_option("--mock-seed", c.mock_seed, "Mock encoder seed");
  compile_cmd->add_option("--mock-dims", c.mock_dims, "Feature dims per mock encoder")->delimiter(',');
  compile_cmd->add_option("--mock-layers", c.mock_layers, "Layers per mock encoder")->check(CLI::PositiveNumber);
  compile_cmd->add_option("--lora-scale", c.lora_scale, "Recorded in the embedding sidecar");
  compile_cmd->add_option("--out", c.out, "Embedding output file (WPME)");
  compile_cmd->add_flag("--pretty", pretty, "Indent JSON output");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (parse_cmd->parsed()) {
      out << dump(json(parse_prompt_attention(read_input(input))), pretty);
      return kExitOk;
    }
    if (tokenize_cmd->parsed()) {
      const auto text = read_input(input);
      const auto vocab = load_vocab(vocab_args);
      out << dump(json(tokenize(*vocab, parse_prompt_attention(text))), pretty);
      return kExitOk;
    }
    if (lint_cmd->parsed()) {
      const auto report = lint(parse_prompt_attention(read_input(input)), weighter_template(lint_template).policy);
      out << dump(json(report), pretty);
      return report.has_errors() ? kExitValidation : kExitOk;
    }
    if (heatmap_cmd->parsed()) return cmd_heatmap(input, vocab_args, svg, pretty, heatmap_out, out);
    if (compile_cmd->parsed()) return cmd_compile(input, vocab_args, compile_args, pretty, out, err);
  } catch (const Failure& f) {
    err << "wpm: " << f.message << "\n";
    return f.code;
  } catch (const EncoderShapeError& e) {
    err << "wpm: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "wpm: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace wpm::cli
