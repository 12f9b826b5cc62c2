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

#include "wpm/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wpm/attention_grammar.hpp"
#include "wpm/unicode.hpp"

namespace wpm {

namespace {

constexpr int kCellWidth = 6;
constexpr int kRowHeight = 18;
constexpr int kLabelWidth = 140;

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Subword pieces can split a multi-byte character; show those bytes as U+FFFD.
std::string printable(std::string_view s) {
  std::string out;
  for (char32_t cp : unicode::decode(s)) {
    const bool raw = cp >= unicode::kRawByteBase && cp <= unicode::kRawByteBase + 0xFF;
    unicode::append_utf8(out, raw || cp < 0x20 ? U'�' : cp);
  }
  return out;
}

std::size_t display_width(std::string_view s) { return unicode::decode(s).size(); }

}  // namespace

std::vector<HeatmapRow> token_heatmap(const Vocabulary& vocab, const TokenizedPrompt& tokens) {
  std::vector<HeatmapRow> rows;
  rows.reserve(tokens.ids.size());
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    const double w = tokens.weights[i];
    const int cells = static_cast<int>(std::max(0.0, std::round(w * kHeatmapCellsPerUnit)));
    rows.push_back({printable(decode_token(vocab, tokens.ids[i])), tokens.ids[i], w, cells});
  }
  return rows;
}

std::string render_heatmap_table(const std::vector<HeatmapRow>& rows) {
  std::size_t token_width = 5;
  for (const auto& r : rows) token_width = std::max(token_width, display_width(r.token));
  std::ostringstream out;
  auto pad = [&](std::string_view s, std::size_t width) {
    out << s << std::string(width - std::min(width, display_width(s)), ' ');
  };
  pad("token", token_width);
  out << "  " << "   id" << "  " << "weight    " << "\n";
  for (const auto& r : rows) {
    pad(r.token, token_width);
    const auto id = std::to_string(r.id);
    out << "  " << std::string(5 - std::min<std::size_t>(5, id.size()), ' ') << id << "  ";
    pad(format_weight(r.weight), 10);
    for (int c = 0; c < r.cells; ++c) out << "█";
    out << "\n";
  }
  return out.str();
}

std::string render_heatmap_svg(const std::vector<HeatmapRow>& rows) {
  int max_cells = kHeatmapCellsPerUnit;
  for (const auto& r : rows) max_cells = std::max(max_cells, r.cells);
  const int width = kLabelWidth + max_cells * kCellWidth + 10;
  const int height = static_cast<int>(rows.size()) * kRowHeight + 4;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" class=\"wpm-heatmap\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const int y = static_cast<int>(i) * kRowHeight + 2;
    // Hotter hue for heavier weights; 1.0 sits at mid-scale.
    const double t = std::clamp(r.weight / 2.0, 0.0, 1.0);
    const int red = static_cast<int>(std::lround(255 * t));
    const int blue = 255 - red;
    out << "  <g class=\"token\" data-id=\"" << r.id << "\" data-weight=\"" << format_weight(r.weight) << "\">\n"
        << "    <text class=\"label\" x=\"2\" y=\"" << y + 13 << "\" font-family=\"monospace\" font-size=\"12\">"
        << xml_escape(r.token) << "</text>\n"
        << "    <rect class=\"bar\" x=\"" << kLabelWidth << "\" y=\"" << y << "\" width=\"" << r.cells * kCellWidth
        << "\" height=\"" << kRowHeight - 4 << "\" fill=\"rgb(" << red << ",64," << blue << ")\"/>\n"
        << "  </g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void to_json(nlohmann::json& j, const HeatmapRow& row) {
  j = {{"token", row.token}, {"id", row.id}, {"weight", row.weight}, {"cells", row.cells}};
}

}  // namespace wpm
