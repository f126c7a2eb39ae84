// Copyright 2026 The EMCNet Authors
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

#include "emcnet/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "emcnet/errors.hpp"

namespace emcnet {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Parses the next unsigned decimal header field, skipping whitespace and comments.
std::size_t pnm_field(const std::vector<unsigned char>& b, std::size_t& pos, const std::string& name) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError(name + ": malformed PNM header");
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (1u << 30)) throw FormatError(name + ": PNM header value too large");
    ++pos;
  }
  return v;
}

Image decode_pnm(const std::vector<unsigned char>& b, const std::string& name) {
  const bool gray = b[1] == '5';
  std::size_t pos = 2;
  const std::size_t w = pnm_field(b, pos, name);
  const std::size_t h = pnm_field(b, pos, name);
  const std::size_t maxval = pnm_field(b, pos, name);
  if (w == 0 || h == 0) throw FormatError(name + ": zero image dimension");
  if (maxval == 0 || maxval > 255)
    throw FormatError(name + ": unsupported bit depth (maxval " + std::to_string(maxval) + ", need 8-bit)");
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError(name + ": malformed PNM header");
  ++pos;  // single whitespace before the raster

  const std::size_t src_c = gray ? 1 : 3;
  const std::size_t need = w * h * src_c;
  if (b.size() - pos < need)
    throw FormatError(name + ": truncated payload (" + std::to_string(b.size() - pos) + " of " +
                      std::to_string(need) + " bytes)");
  Image img(h, w, 3);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < w * h; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      img.pixels[i * 3 + c] = std::min(1.0, b[pos + i * src_c + (gray ? 0 : c)] * scale);
  return img;
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

Image decode_raw(const std::vector<unsigned char>& b, const std::string& name) {
  const std::size_t magic = sizeof(kRawImageMagic) - 1;
  if (b.size() < magic + 12) throw FormatError(name + ": truncated header");
  const std::size_t h = get_u32(b.data() + magic);
  const std::size_t w = get_u32(b.data() + magic + 4);
  const std::size_t c = get_u32(b.data() + magic + 8);
  if (h == 0 || w == 0 || c == 0) throw FormatError(name + ": zero image dimension");
  const std::size_t n = h * w * c;
  const std::size_t body = b.size() - magic - 12;
  if (body < n * 8)
    throw FormatError(name + ": truncated payload (" + std::to_string(body) + " of " +
                      std::to_string(n * 8) + " bytes)");
  Image img(h, w, c);
  const unsigned char* p = b.data() + magic + 12;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(p[8 * i + k]) << (8 * k);
    const double v = std::bit_cast<double>(bits);
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError(name + ": pixel value outside [0, 1]");
    img.pixels[i] = v;
  }
  return img;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const std::string name = path.string();
  const std::size_t magic = sizeof(kRawImageMagic) - 1;
  if (bytes.size() >= magic && std::memcmp(bytes.data(), kRawImageMagic, magic) == 0)
    return decode_raw(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
    return decode_pnm(bytes, name);
  throw FormatError(name + ": unknown image magic");
}

void save_raw_image(const std::filesystem::path& path, const Image& image) {
  if (image.pixels.size() != image.height * image.width * image.channels)
    throw DimensionError("save_raw_image: pixel count does not match dimensions");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write image " + path.string());
  os.write(kRawImageMagic, sizeof(kRawImageMagic) - 1);
  for (std::size_t v : {image.height, image.width, image.channels}) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  for (double v : image.pixels) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) throw IoError("short write on image " + path.string());
}

Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw DimensionError("resize_bilinear: output dimensions must be >= 1");
  const std::size_t C = image.channels;
  Image out(out_h, out_w, C);
  auto src_coord = [](std::size_t i, std::size_t out_n, std::size_t in_n) {
    if (out_n == 1 || in_n == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = src_coord(y, out_h, image.height);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = src_coord(x, out_w, image.width);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < C; ++c) {
        const double top = (1 - fx) * image.at(y0, x0, c) + fx * image.at(y0, x1, c);
        const double bot = (1 - fx) * image.at(y1, x0, c) + fx * image.at(y1, x1, c);
        out.at(y, x, c) = std::clamp((1 - fy) * top + fy * bot, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image normalize_minmax(const Image& image) {
  Image out = image;
  if (out.pixels.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.pixels.begin(), out.pixels.end());
  const double mn = *lo, range = *hi - *lo;
  for (double& v : out.pixels) v = range > 0.0 ? (v - mn) / range : 0.0;
  return out;
}

Image to_rgb(const Image& image) {
  if (image.channels != 1) return image;
  Image out(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.height * image.width; ++i)
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = image.pixels[i];
  return out;
}

Image prepare_image(const Image& image, std::size_t side) {
  Image rgb = to_rgb(image);
  if (rgb.height != side || rgb.width != side) rgb = resize_bilinear(rgb, side, side);
  return normalize_minmax(rgb);
}

PatchSequence patchify(const Image& image, std::size_t patch) {
  const std::size_t H = image.height, W = image.width, C = image.channels;
  if (patch == 0 || H % patch != 0 || W % patch != 0)
    throw TokenizationError("cannot tile H=" + std::to_string(H) + ", W=" + std::to_string(W) +
                            " into P=" + std::to_string(patch) + " patches");
  PatchSequence seq;
  seq.patch = patch;
  seq.channels = C;
  seq.grid_rows = H / patch;
  seq.grid_cols = W / patch;
  seq.count = seq.grid_rows * seq.grid_cols;
  const std::size_t len = patch * patch * C;
  std::vector<double> flat(seq.count * len);
  for (std::size_t k = 0; k < seq.count; ++k) {
    const std::size_t y0 = (k / seq.grid_cols) * patch;
    const std::size_t x0 = (k % seq.grid_cols) * patch;
    double* row = flat.data() + k * len;
    for (std::size_t dy = 0; dy < patch; ++dy) {
      const double* src = image.pixels.data() + ((y0 + dy) * W + x0) * C;
      std::copy_n(src, patch * C, row + dy * patch * C);
    }
  }
  seq.flat = Tensor::from({seq.count, len}, std::move(flat));
  return seq;
}

Image unpatchify(const PatchSequence& seq) {
  const std::size_t P = seq.patch, C = seq.channels;
  Image img(seq.grid_rows * P, seq.grid_cols * P, C);
  const auto flat = seq.flat.data();
  const std::size_t len = P * P * C;
  for (std::size_t k = 0; k < seq.count; ++k) {
    const std::size_t y0 = (k / seq.grid_cols) * P;
    const std::size_t x0 = (k % seq.grid_cols) * P;
    for (std::size_t dy = 0; dy < P; ++dy)
      std::copy_n(flat.data() + k * len + dy * P * C, P * C,
                  img.pixels.data() + ((y0 + dy) * img.width + x0) * C);
  }
  return img;
}

}  // namespace emcnet
