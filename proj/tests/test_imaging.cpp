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

#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "emcnet/dataset.hpp"
#include "emcnet/errors.hpp"
#include "emcnet/imaging.hpp"
#include "emcnet/rng.hpp"

using namespace emcnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emcnet_test_" + name);
  fs::remove_all(p);
  return p;
}

void write_bytes(const fs::path& p, const std::string& header, const std::vector<unsigned char>& body) {
  std::ofstream os(p, std::ios::binary);
  os << header;
  os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Image random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("PNM loading") {
  const fs::path pgm = scratch("a.pgm");
  write_bytes(pgm, "P5\n2 2\n255\n", {0, 255, 0, 255});
  const Image g = load_image(pgm);
  CHECK(g.height == 2);
  CHECK(g.channels == 3);
  const std::vector<double> expect{0, 1, 0, 1};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(g.pixels[i * 3 + c] == expect[i]);

  const fs::path ppm = scratch("b.ppm");
  write_bytes(ppm, "P6\n3 2\n255\n", std::vector<unsigned char>(18, 0));
  const Image z = load_image(ppm);
  CHECK(z.width == 3);
  for (double v : z.pixels) CHECK(v == 0.0);

  const fs::path cut = scratch("c.ppm");
  write_bytes(cut, "P6\n3 2\n255\n", std::vector<unsigned char>(10, 0));
  CHECK_THROWS_WITH_AS(load_image(cut), doctest::Contains("truncated"), FormatError);

  const fs::path deep = scratch("d.pgm");
  write_bytes(deep, "P5\n1 1\n65535\n", {0, 0});
  CHECK_THROWS_AS(load_image(deep), FormatError);

  const fs::path junk = scratch("e.img");
  write_bytes(junk, "JUNK", {1, 2, 3});
  CHECK_THROWS_WITH_AS(load_image(junk), doctest::Contains("magic"), FormatError);
  for (const auto& p : {pgm, ppm, cut, deep, junk}) fs::remove(p);
}

TEST_CASE("raw image round trip") {
  Rng rng(1);
  const Image img = random_image(rng, 5, 7, 3);
  const fs::path p = scratch("raw.img");
  save_raw_image(p, img);
  const Image back = load_image(p);
  CHECK(back.height == 5);
  CHECK(back.width == 7);
  CHECK(back.pixels == img.pixels);
  fs::remove(p);
}

TEST_CASE("bilinear resize") {
  Rng rng(2);
  const Image img = random_image(rng, 6, 5, 3);
  const Image same = resize_bilinear(img, 6, 5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(std::abs(same.pixels[i] - img.pixels[i]) <= 1e-12);

  const Image flat(4, 4, 3, 0.37);
  for (double v : resize_bilinear(flat, 9, 3).pixels) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));

  Image ramp(2, 2, 1);
  ramp.pixels = {0, 1, 0, 1};
  const Image wide = resize_bilinear(ramp, 2, 3);
  CHECK(wide.at(0, 1, 0) == doctest::Approx(0.5));
  CHECK(wide.at(1, 1, 0) == doctest::Approx(0.5));
  CHECK(wide.at(0, 0, 0) == 0.0);
  CHECK(wide.at(0, 2, 0) == 1.0);
  CHECK_THROWS_AS(resize_bilinear(ramp, 0, 3), DimensionError);
}

TEST_CASE("normalization and preparation") {
  Image img(2, 2, 1);
  img.pixels = {0.2, 0.4, 0.6, 0.3};
  const Image n = normalize_minmax(img);
  CHECK(n.pixels[0] == 0.0);
  CHECK(n.pixels[2] == 1.0);
  CHECK(n.pixels[1] == doctest::Approx(0.5));
  for (double v : normalize_minmax(Image(3, 3, 3, 0.5)).pixels) CHECK(v == 0.0);

  const Image prepared = prepare_image(img, 8);
  CHECK(prepared.height == 8);
  CHECK(prepared.channels == 3);
}

TEST_CASE("patchify layout and inverse") {
  Rng rng(3);
  const Image img = random_image(rng, 256, 256, 3);
  const PatchSequence seq = patchify(img, 32);
  CHECK(seq.count == 64);
  CHECK(seq.flat.shape() == Shape{64, 3072});
  CHECK(unpatchify(seq).pixels == img.pixels);

  // Patch k covers rows (k / cols) * P and columns (k % cols) * P.
  const Image small = random_image(rng, 6, 9, 3);
  const PatchSequence s3 = patchify(small, 3);
  CHECK(s3.count == 6);
  for (std::size_t k = 0; k < s3.count; ++k)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          CHECK(s3.flat.at(k, (y * 3 + x) * 3 + c) == small.at((k / 3) * 3 + y, (k % 3) * 3 + x, c));

  const Image big = random_image(rng, 64, 64, 3);
  const PatchSequence fs64 = patchify(resize_bilinear(big, 512, 512), 64);
  CHECK(fs64.count == 64);
  const PatchSequence one = patchify(big, 64);
  CHECK(one.count == 1);
  CHECK(one.flat.to_vector() == big.pixels);

  CHECK_THROWS_WITH_AS(patchify(random_image(rng, 10, 12, 3), 4), doctest::Contains("H=10"), TokenizationError);
}

TEST_CASE("synthetic dataset") {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  SynthOptions opt;
  opt.n_classes = 4;
  opt.per_class = 10;
  opt.side = 64;
  opt.seed = 7;
  const DatasetManifest m = generate_synthetic_dataset(opt, a);
  generate_synthetic_dataset(opt, b);
  CHECK(m.entries.size() == 40);
  CHECK(m.classes.size() == 4);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  for (const auto& e : m.entries) CHECK(slurp(a / e.path) == slurp(b / e.path));
  CHECK(m.train.size() + m.val.size() + m.test.size() == 40);
  CHECK_NOTHROW(m.validate());

  // Leave-one-out nearest centroid on prepared pixels beats chance.
  std::vector<std::vector<double>> pix;
  for (std::size_t i = 0; i < m.entries.size(); ++i) pix.push_back(prepare_image(load_image(m.resolve(i)), 64).pixels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pix.size(); ++i) {
    std::vector<std::vector<double>> centroid(4, std::vector<double>(pix[0].size(), 0.0));
    std::vector<double> count(4, 0.0);
    for (std::size_t j = 0; j < pix.size(); ++j) {
      if (j == i) continue;
      const std::size_t c = m.entries[j].label;
      count[c] += 1.0;
      for (std::size_t k = 0; k < pix[j].size(); ++k) centroid[c][k] += pix[j][k];
    }
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < 4; ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < pix[i].size(); ++k) {
        const double diff = pix[i][k] - centroid[c][k] / count[c];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == m.entries[i].label;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(pix.size()) > 0.25);

  opt.per_class = 0;
  CHECK_THROWS_AS(generate_synthetic_dataset(opt, scratch("synth_c")), EmptyInputError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  m.classes = {"a", "b"};
  m.entries = {{"x", 0}, {"y", 1}, {"z", 2}};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.entries[2].label = 1;
  m.train = {0, 1};
  m.val = {1};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.val = {2};
  CHECK_NOTHROW(m.validate());
  const DatasetManifest back = manifest_from_json(manifest_to_json(m), ".");
  CHECK(back.val == m.val);
  CHECK_THROWS_AS(m.split("holdout"), ConfigError);
}
