// Copyright 2026 The mvkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvkd/heatmap_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <regex>
#include <vector>

namespace mvkd {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated heatmap file: " + path);
  return v;
}

StoredHeatmap read_npy(std::ifstream& in, const std::string& path) {
  in.seekg(6);
  const uint8_t major = get<uint8_t>(in, path);
  get<uint8_t>(in, path);
  uint32_t header_len = major == 1 ? get<uint16_t>(in, path) : get<uint32_t>(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw IoError("truncated npy header: " + path);
  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([<|=]?f[48])'"))) {
    throw IoError("npy dtype must be float32 or float64: " + path);
  }
  const bool f8 = m[1].str().back() == '8';
  if (std::regex_search(header, std::regex("'fortran_order':\\s*True"))) {
    throw IoError("fortran-ordered npy not supported: " + path);
  }
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)"))) {
    throw IoError("npy shape missing: " + path);
  }
  std::vector<int> dims;
  const std::string shape = m[1].str();
  std::regex num("[0-9]+");
  for (auto it = std::sregex_iterator(shape.begin(), shape.end(), num); it != std::sregex_iterator(); ++it) {
    dims.push_back(std::stoi(it->str()));
  }
  if (dims.size() == 2) dims.insert(dims.begin(), 1);
  if (dims.size() != 3) throw IoError("npy heatmap must be (C,H,W) or (H,W): " + path);
  StoredHeatmap out{Heatmap2D(dims[1], dims[2], dims[0]), 0};
  for (double& v : out.heatmap.values) v = f8 ? get<double>(in, path) : get<float>(in, path);
  return out;
}

}  // namespace

void write_heatmap(const std::string& path, const Heatmap2D& hm, int frame_index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write heatmap: " + path);
  out.write("MVKD", 4);
  put<uint32_t>(out, kHeatmapFormatVersion);
  put<uint32_t>(out, static_cast<uint32_t>(hm.height));
  put<uint32_t>(out, static_cast<uint32_t>(hm.width));
  put<uint32_t>(out, static_cast<uint32_t>(hm.channels));
  put<int32_t>(out, hm.view_index);
  put<int32_t>(out, frame_index);
  for (double v : hm.values) put<float>(out, static_cast<float>(v));
  if (!out) throw IoError("write failed: " + path);
}

StoredHeatmap read_heatmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open heatmap: " + path);
  char magic[6] = {};
  in.read(magic, 6);
  if (in && std::memcmp(magic, "\x93NUMPY", 6) == 0) return read_npy(in, path);
  in.clear();
  if (std::memcmp(magic, "MVKD", 4) != 0) throw IoError("not an MVKD heatmap: " + path);
  in.seekg(4);
  const uint32_t version = get<uint32_t>(in, path);
  if (version != kHeatmapFormatVersion) {
    throw IoError("unsupported heatmap version " + std::to_string(version) + ": " + path);
  }
  const uint32_t h = get<uint32_t>(in, path), w = get<uint32_t>(in, path),
                 c = get<uint32_t>(in, path);
  const int32_t view = get<int32_t>(in, path), frame = get<int32_t>(in, path);
  StoredHeatmap out{Heatmap2D(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), view),
                    frame};
  for (double& v : out.heatmap.values) v = get<float>(in, path);
  return out;
}

void write_heatmap_npy(const std::string& path, const Heatmap2D& hm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write npy: " + path);
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                       std::to_string(hm.channels) + ", " + std::to_string(hm.height) + ", " +
                       std::to_string(hm.width) + "), }";
  // Pad so that magic + version + len + header is a multiple of 64.
  while ((10 + header.size() + 1) % 64 != 0) header.push_back(' ');
  header.push_back('\n');
  out.write("\x93NUMPY", 6);
  put<uint8_t>(out, 1);
  put<uint8_t>(out, 0);
  put<uint16_t>(out, static_cast<uint16_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : hm.values) put<float>(out, static_cast<float>(v));
}

}  // namespace mvkd
