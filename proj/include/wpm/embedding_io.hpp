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

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "wpm/conditioner.hpp"

namespace wpm {

// Binary layout, all integers and floats little-endian:
//   "WPME" | 0x01 | rows:u32 | cols:u32 | reserved:u32 = 0 | rows*cols f32, row-major
inline constexpr char kWpmeMagic[4] = {'W', 'P', 'M', 'E'};
inline constexpr unsigned char kWpmeVersion = 0x01;
inline constexpr std::size_t kWpmeHeaderSize = 4 + 1 + 3 * 4;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_wpme(const EmbeddingMatrix& m);
EmbeddingMatrix decode_wpme(std::string_view bytes);

void write_wpme(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_wpme(const std::filesystem::path& path);

// {"pooled":[...], "lora_scale":x, "clip_skip":k}
nlohmann::json wpme_sidecar(const PooledVector& pooled, double lora_scale, int clip_skip);

}  // namespace wpm
