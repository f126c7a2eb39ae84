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

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "emcnet/tensor.hpp"

namespace emcnet {

// Row-major HWC pixels.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

// Non-overlapping P x P tiles; row k of `flat` is patch k (row-major patch
// order) flattened in (y, x, channel) order.
struct PatchSequence {
  std::size_t count = 0;
  std::size_t patch = 0;
  std::size_t channels = 0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  Tensor flat;  // count x (patch * patch * channels)
};

// Raw tensor image: "EMCIMG1", u32 H, W, C (little endian), H*W*C float64.
inline constexpr char kRawImageMagic[] = "EMCIMG1";

// Reads binary PGM (P5, replicated to three channels), binary PPM (P6) or
// the raw EMCIMG1 format. PNM samples are scaled by 1/maxval into [0, 1].
Image load_image(const std::filesystem::path& path);
void save_raw_image(const std::filesystem::path& path, const Image& image);

// Corner-aligned bilinear interpolation.
Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w);
// Per-image min-max scaling into [0, 1]; a constant image maps to zeros.
Image normalize_minmax(const Image& image);
// Replicates single-channel images to three channels; others pass through.
Image to_rgb(const Image& image);
// to_rgb -> resize to side x side -> normalize_minmax.
Image prepare_image(const Image& image, std::size_t side);

PatchSequence patchify(const Image& image, std::size_t patch);
Image unpatchify(const PatchSequence& seq);

}  // namespace emcnet
