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

#include "mvkd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace mvkd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

uint8_t quantize(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Frame read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (png == nullptr || info == nullptr) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<uint8_t> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Frame f(h, w, channels);
  const double scale = out_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w * channels; ++x) {
      double v;
      if (out_depth == 16) {
        uint16_t s;
        std::memcpy(&s, rows[y] + 2 * x, 2);
        v = s * scale;
      } else {
        v = rows[y][x] * scale;
      }
      f.values[static_cast<size_t>(y) * w * channels + x] = v;
    }
  }
  return f;
}

Frame read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError("unsupported PGM variant in " + path);
  auto next_int = [&]() {
    int v = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      in >> v;
      return v;
    }
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError("corrupt PGM header: " + path);
  }
  Frame f(h, w, 1);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw IoError("truncated PGM: " + path);
  for (size_t i = 0; i < f.values.size(); ++i) {
    const int v = bytes == 2 ? (buf[2 * i] << 8) | buf[2 * i + 1] : buf[i];
    f.values[i] = static_cast<double>(v) / maxval;
  }
  return f;
}

}  // namespace

Frame read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open image: " + path);
  char sig[8] = {};
  probe.read(sig, 8);
  if (png_sig_cmp(reinterpret_cast<png_const_bytep>(sig), 0, 8) == 0) return read_png(path);
  if (sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
  throw IoError("unrecognized image format: " + path);
}

void write_png(const std::string& path, const Frame& frame) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (png == nullptr || info == nullptr) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, frame.width, frame.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(frame.width);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) row[x] = quantize(frame.at(y, x, 0));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pgm(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) out.put(static_cast<char>(quantize(frame.at(y, x, 0))));
  }
}

void write_image(const std::string& path, const Frame& frame) {
  if (has_suffix(path, ".pgm")) {
    write_pgm(path, frame);
  } else if (has_suffix(path, ".png")) {
    write_png(path, frame);
  } else {
    throw IoError("unknown image extension: " + path);
  }
}

}  // namespace mvkd
