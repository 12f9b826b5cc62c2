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

#include "wpm/embedding_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wpm {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_wpme(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kWpmeHeaderSize + 4 * static_cast<std::size_t>(m.size()));
  out.append(kWpmeMagic, sizeof(kWpmeMagic));
  out.push_back(static_cast<char>(kWpmeVersion));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  put_u32(out, 0);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(m(r, c)));
  return out;
}

EmbeddingMatrix decode_wpme(std::string_view bytes) {
  if (bytes.size() < kWpmeHeaderSize || std::memcmp(bytes.data(), kWpmeMagic, 4) != 0) {
    throw FormatError("not a WPME file");
  }
  if (static_cast<unsigned char>(bytes[4]) != kWpmeVersion) {
    throw FormatError("unsupported WPME version " + std::to_string(static_cast<unsigned char>(bytes[4])));
  }
  const std::uint32_t rows = get_u32(bytes, 5);
  const std::uint32_t cols = get_u32(bytes, 9);
  if (get_u32(bytes, 13) != 0) throw FormatError("WPME reserved field is not zero");
  const std::uint64_t expected = kWpmeHeaderSize + 4ULL * rows * cols;
  if (bytes.size() != expected) {
    throw FormatError("WPME payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  EmbeddingMatrix m(rows, cols);
  std::size_t pos = kWpmeHeaderSize;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c, pos += 4) m(r, c) = std::bit_cast<float>(get_u32(bytes, pos));
  return m;
}

void write_wpme(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto bytes = encode_wpme(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EmbeddingMatrix read_wpme(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_wpme(ss.str());
}

nlohmann::json wpme_sidecar(const PooledVector& pooled, double lora_scale, int clip_skip) {
  return {{"pooled", std::vector<float>(pooled.data(), pooled.data() + pooled.size())},
          {"lora_scale", lora_scale},
          {"clip_skip", clip_skip}};
}

}  // namespace wpm
