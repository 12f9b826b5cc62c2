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

#include <string>
#include <vector>

#include "json.hpp"
#include "wpm/clip_tokenizer.hpp"

namespace wpm {

// Cells per unit weight; weight 1.0 draws a 20-cell bar.
inline constexpr int kHeatmapCellsPerUnit = 20;

struct HeatmapRow {
  std::string token;  // decoded subword text
  TokenId id;
  double weight;
  int cells;  // round(weight * 20), clamped at 0
};

std::vector<HeatmapRow> token_heatmap(const Vocabulary& vocab, const TokenizedPrompt& tokens);

// Aligned columns: token, id, weight, bar.
std::string render_heatmap_table(const std::vector<HeatmapRow>& rows);

// <svg class="wpm-heatmap"> with one <g class="token" data-id data-weight>
// per row, each holding a <text class="label"> and a <rect class="bar">.
std::string render_heatmap_svg(const std::vector<HeatmapRow>& rows);

void to_json(nlohmann::json& j, const HeatmapRow& row);

}  // namespace wpm
