/* Copyright 2026 The fliqs Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fliqs/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "fliqs/error.hpp"
#include "fliqs/rng.hpp"

namespace fliqs {

std::vector<std::size_t> Dataset::example_shape() const {
  return {images.shape.begin() + 1, images.shape.end()};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) throw FormatError(std::string("IDX header truncated reading ") + what, offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  const std::uint32_t im_magic = read_be32(images, 0, "image magic");
  if (im_magic != kImageMagic) throw FormatError("image file has wrong IDX magic", 0);
  const std::size_t n = read_be32(images, 4, "image count");
  const std::size_t h = read_be32(images, 8, "rows");
  const std::size_t w = read_be32(images, 12, "columns");
  const std::size_t payload = n * h * w;
  if (images.size() < 16 + payload) {
    throw FormatError("image payload truncated: expected " + std::to_string(payload) + " bytes", images.size());
  }

  const std::uint32_t lb_magic = read_be32(labels, 0, "label magic");
  if (lb_magic != kLabelMagic) throw FormatError("label file has wrong IDX magic", 0);
  const std::size_t nl = read_be32(labels, 4, "label count");
  if (nl != n) {
    throw FormatError("label count " + std::to_string(nl) + " does not match image count " + std::to_string(n), 4);
  }
  if (labels.size() < 8 + n) throw FormatError("label payload truncated", labels.size());

  Dataset ds;
  ds.images = Tensor({n, 1, h, w});
  for (std::size_t i = 0; i < payload; ++i) ds.images.data[i] = images[16 + i] / 255.0;
  ds.labels.resize(n);
  int top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = labels[8 + i];
    top = std::max(top, ds.labels[i]);
  }
  ds.classes = static_cast<std::size_t>(top) + 1;
  return ds;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto im = read_file(images_path);
  const auto lb = read_file(labels_path);
  Dataset ds = decode_idx(im, lb);
  ds.source = images_path.string();
  return ds;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  const auto& s = ds.images.shape;
  std::size_t h = 0, w = 0;
  if (s.size() == 4 && s[1] == 1) {
    h = s[2];
    w = s[3];
  } else if (s.size() == 3) {
    h = s[1];
    w = s[2];
  } else {
    throw ParamError("write_idx: images must be [N,1,H,W] or [N,H,W], got " + shape_string(s));
  }
  std::ofstream im(images_path, std::ios::binary);
  std::ofstream lb(labels_path, std::ios::binary);
  if (!im || !lb) throw Error("cannot write IDX files next to '" + images_path.string() + "'");
  write_be32(im, kImageMagic);
  write_be32(im, static_cast<std::uint32_t>(ds.size()));
  write_be32(im, static_cast<std::uint32_t>(h));
  write_be32(im, static_cast<std::uint32_t>(w));
  std::vector<char> bytes(ds.images.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(ds.images.data[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  im.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  write_be32(lb, kLabelMagic);
  write_be32(lb, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) lb.put(static_cast<char>(y));
  if (!im || !lb) throw Error("failed writing IDX files");
}

bool find_mnist(const std::filesystem::path& dir, Dataset& train, Dataset& test) {
  const auto ti = dir / "train-images-idx3-ubyte", tl = dir / "train-labels-idx1-ubyte";
  if (!std::filesystem::exists(ti) || !std::filesystem::exists(tl)) return false;
  train = load_idx(ti, tl);
  const auto vi = dir / "t10k-images-idx3-ubyte", vl = dir / "t10k-labels-idx1-ubyte";
  if (std::filesystem::exists(vi) && std::filesystem::exists(vl)) test = load_idx(vi, vl);
  return true;
}

// ---------------------------------------------------------------------------
// synthetic data

Dataset synth_blobs(std::size_t classes, std::size_t dims, std::size_t n_per_class, double separation,
                    std::uint64_t seed) {
  if (classes < 2) throw ParamError("synth_blobs: need at least 2 classes");
  if (dims == 0 || n_per_class == 0) throw ParamError("synth_blobs: dims and n_per_class must be positive");
  Rng rng = make_rng(seed, streams::kSynthData, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> means(classes, std::vector<double>(dims));
  for (auto& m : means) {
    double norm = 0.0;
    for (auto& v : m) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : m) v *= separation / std::numbers::sqrt2 / norm;
  }
  const std::size_t n = classes * n_per_class;
  Dataset ds;
  ds.images = Tensor({n, dims});
  ds.labels.resize(n);
  ds.classes = classes;
  ds.source = "synth-blobs";
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    ds.labels[i] = c;
    for (std::size_t d = 0; d < dims; ++d) ds.images.data[i * dims + d] = means[c][d] + normal(rng);
  }
  return ds;
}

namespace {

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;

Stroke ellipse(double cx, double cy, double rx, double ry, double from = 0.0, double to = 2 * std::numbers::pi,
               int segments = 14) {
  Stroke s;
  for (int i = 0; i <= segments; ++i) {
    const double t = from + (to - from) * i / segments;
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

// Glyphs in a unit box, y pointing down.
const std::array<std::vector<Stroke>, 10>& glyphs() {
  constexpr double pi = std::numbers::pi;
  static const std::array<std::vector<Stroke>, 10> g = {{
      {ellipse(0.5, 0.5, 0.28, 0.42)},
      {{{0.5, 0.08}, {0.5, 0.92}}, {{0.32, 0.24}, {0.5, 0.08}}},
      {{{0.22, 0.3}, {0.3, 0.14}, {0.5, 0.08}, {0.7, 0.14}, {0.78, 0.3}, {0.7, 0.46}, {0.22, 0.92}, {0.8, 0.92}}},
      {{{0.22, 0.12}, {0.75, 0.12}, {0.45, 0.45}, {0.7, 0.55}, {0.78, 0.72}, {0.65, 0.9}, {0.4, 0.92}, {0.22, 0.82}}},
      {{{0.65, 0.92}, {0.65, 0.08}, {0.2, 0.65}, {0.82, 0.65}}},
      {{{0.78, 0.1}, {0.28, 0.1}, {0.25, 0.45}, {0.55, 0.4}, {0.75, 0.55}, {0.75, 0.78}, {0.55, 0.92}, {0.25, 0.88}}},
      {{{0.7, 0.1}, {0.45, 0.25}, {0.28, 0.55}}, ellipse(0.5, 0.7, 0.22, 0.22, pi, 3 * pi)},
      {{{0.2, 0.1}, {0.8, 0.1}, {0.42, 0.92}}},
      {ellipse(0.5, 0.28, 0.19, 0.2), ellipse(0.5, 0.7, 0.23, 0.22)},
      {ellipse(0.5, 0.32, 0.21, 0.22), {{0.71, 0.32}, {0.62, 0.92}}},
  }};
  return g;
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

void render_digit(int digit, Rng& rng, double* out) {
  constexpr std::size_t kSide = 28;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double angle = 0.5 * u(rng);
  const double scale = 18.0 + 5.0 * u(rng);
  const double aspect = 1.0 + 0.18 * u(rng);
  const double shear = 0.5 * u(rng);
  const double shift_x = 2.0 * u(rng), shift_y = 2.0 * u(rng);
  const double thickness = 1.5 + 0.6 * u(rng);
  const double contrast = 0.8 + 0.2 * u(rng);

  // Jitter control points, then map into pixel space.
  std::vector<std::pair<Point, Point>> segments;
  const double ca = std::cos(angle), sa = std::sin(angle);
  auto to_pixels = [&](double x, double y) {
    const double sx = (x + shear * y) * scale / aspect;
    const double sy = y * scale * aspect;
    return Point{13.5 + shift_x + ca * sx - sa * sy, 13.5 + shift_y + sa * sx + ca * sy};
  };
  for (const auto& stroke : glyphs()[static_cast<std::size_t>(digit)]) {
    Stroke pts;
    for (const auto& p : stroke) {
      const double jx = 0.1 * u(rng);
      const double jy = 0.1 * u(rng);
      pts.push_back(to_pixels(p.x - 0.5 + jx, p.y - 0.5 + jy));
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) segments.emplace_back(pts[i], pts[i + 1]);
  }
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t r = 0; r < kSide; ++r) {
    for (std::size_t c = 0; c < kSide; ++c) {
      const Point p{static_cast<double>(c), static_cast<double>(r)};
      double d = 1e9;
      for (const auto& [a, b] : segments) d = std::min(d, segment_distance(p, a, b));
      double v = contrast * std::clamp(1.0 - (d - 0.5 * thickness), 0.0, 1.0);
      v = std::clamp(v + noise(rng), 0.0, 1.0);
      out[r * kSide + c] = std::round(v * 255.0) / 255.0;
    }
  }
}

}  // namespace

Dataset synth_digits(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ParamError("synth_digits: count must be positive");
  Dataset ds;
  ds.images = Tensor({count, 1, 28, 28});
  ds.labels.resize(count);
  ds.classes = 10;
  ds.source = "synth-digits";
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    Rng rng = make_rng(seed, streams::kSynthData, idx);
    ds.labels[idx] = static_cast<int>(idx % 10);
    render_digit(ds.labels[idx], rng, ds.images.data.data() + idx * 28 * 28);
  }
  return ds;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b = gather(ds, indices);
  Dataset out;
  out.images = std::move(b.x);
  out.labels = std::move(b.y);
  out.classes = ds.classes;
  out.source = ds.source;
  return out;
}

Dataset head(const Dataset& ds, std::size_t n) {
  std::vector<std::size_t> idx(std::min(n, ds.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(ds, idx);
}

// ---------------------------------------------------------------------------
// batching

void BatchPlan::validate(std::size_t n) const {
  if (n == 0) throw ConfigError("dataset is empty");
  if (batch_size == 0 || batch_size > n) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

Split split_indices(std::size_t n, const BatchPlan& plan) {
  plan.validate(n);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = make_rng(plan.seed, streams::kSplit, 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(plan.validation_fraction * static_cast<double>(n) + 1e-9));
  Split s;
  s.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::vector<std::size_t>> train_batches(const Split& split, const BatchPlan& plan,
                                                    std::uint64_t epoch) {
  if (plan.batch_size == 0 || plan.batch_size > split.train.size()) {
    throw ConfigError("batch_size " + std::to_string(plan.batch_size) + " exceeds the training split of " +
                      std::to_string(split.train.size()) + " examples");
  }
  std::vector<std::size_t> order = split.train;
  Rng rng = make_rng(plan.seed, streams::kShuffle, epoch);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start + plan.batch_size <= order.size(); start += plan.batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + plan.batch_size));
  }
  return out;
}

std::vector<std::vector<std::size_t>> validation_batches(const Split& split, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("validation batch size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < split.validation.size(); start += batch_size) {
    const std::size_t end = std::min(split.validation.size(), start + batch_size);
    out.emplace_back(split.validation.begin() + static_cast<std::ptrdiff_t>(start),
                     split.validation.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t row = ds.images.row_size();
  std::vector<std::size_t> shape = ds.images.shape;
  shape[0] = indices.size();
  Batch b;
  b.x = Tensor(shape);
  b.y.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.size()) throw ParamError("gather: index out of range");
    std::copy_n(ds.images.data.data() + indices[i] * row, row, b.x.data.data() + i * row);
    b.y[i] = ds.labels[indices[i]];
  }
  return b;
}

}  // namespace fliqs
