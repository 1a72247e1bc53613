#include "membench/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "membench/error.hpp"

namespace membench::data {

using nn::Shape;
using nn::Tensor;

void AugMode::validate() const {
  if (kind == AugKind::randaug) {
    if (n < 1) throw ConfigError("randaug N must be >= 1");
    if (m < 0 || m > 30) throw ConfigError("randaug M must be in [0, 30]");
  }
}

const char* aug_kind_name(AugKind kind) {
  switch (kind) {
    case AugKind::none: return "none";
    case AugKind::simple: return "simple";
    case AugKind::randaug: return "randaug";
  }
  return "?";
}

AugKind parse_aug_kind(const std::string& name) {
  if (name == "none") return AugKind::none;
  if (name == "simple") return AugKind::simple;
  if (name == "randaug") return AugKind::randaug;
  throw ConfigError("unknown augmentation '" + name + "'");
}

namespace {

void require_raster(const Tensor& image, const char* op) {
  if (image.rank() != 3) throw InvalidInput(std::string(op) + ": expected a c x h x w raster");
}

// Nearest-neighbour inverse warp; out-of-canvas samples are 0.
template <typename SourceFn>
Tensor warp(const Tensor& image, SourceFn source) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape(), 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto [fy, fx] = source(static_cast<double>(y), static_cast<double>(x));
      const long sy = std::lround(fy);
      const long sx = std::lround(fx);
      if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
      for (std::size_t ch = 0; ch < c; ++ch)
        out[(ch * h + y) * w + x] = image[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
    }
  return out;
}

}  // namespace

Tensor hflip(const Tensor& image) {
  require_raster(image, "hflip");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor pad_crop(const Tensor& image, std::size_t pad, std::size_t dy, std::size_t dx) {
  require_raster(image, "pad_crop");
  if (dy > 2 * pad || dx > 2 * pad) throw InvalidInput("pad_crop: crop offset outside padded canvas");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const auto sy = std::clamp<long>(static_cast<long>(y + dy) - static_cast<long>(pad), 0, static_cast<long>(h) - 1);
        const auto sx = std::clamp<long>(static_cast<long>(x + dx) - static_cast<long>(pad), 0, static_cast<long>(w) - 1);
        out[(ch * h + y) * w + x] = image[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
      }
  return out;
}

Tensor jitter(const Tensor& x, Rng& rng, std::span<const double> feature_std) {
  if (!feature_std.empty() && feature_std.size() != x.numel()) {
    throw InvalidInput("jitter: feature_std length does not match sample");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out = x;
  for (std::size_t j = 0; j < out.numel(); ++j) {
    const double sigma = kJitterScale * (feature_std.empty() ? 1.0 : feature_std[j]);
    out[j] += sigma * normal(rng);
  }
  return out;
}

Tensor simple_augment(const Tensor& x, Rng& rng, std::span<const double> feature_std) {
  if (x.rank() != 3) return jitter(x, rng, feature_std);
  std::uniform_int_distribution<std::size_t> offset(0, 2 * kCropPadding);
  const std::size_t dy = offset(rng);
  const std::size_t dx = offset(rng);
  const bool flip = std::bernoulli_distribution(0.5)(rng);
  Tensor out = pad_crop(x, kCropPadding, dy, dx);
  return flip ? hflip(out) : out;
}

const std::vector<RandOp>& randaug_pool() {
  static const std::vector<RandOp> pool = {RandOp::translate_x, RandOp::translate_y, RandOp::rotate,
                                           RandOp::shear_x,     RandOp::shear_y,     RandOp::brightness,
                                           RandOp::contrast,    RandOp::cutout};
  return pool;
}

const char* rand_op_name(RandOp op) {
  switch (op) {
    case RandOp::translate_x: return "translate_x";
    case RandOp::translate_y: return "translate_y";
    case RandOp::rotate: return "rotate";
    case RandOp::shear_x: return "shear_x";
    case RandOp::shear_y: return "shear_y";
    case RandOp::brightness: return "brightness";
    case RandOp::contrast: return "contrast";
    case RandOp::cutout: return "cutout";
  }
  return "?";
}

// Magnitude mapping, level = m / 30:
//   translate: level * 0.3 * extent pixels    rotate: level * 30 degrees
//   shear: level * 0.3                        brightness/contrast: factor 1 +- level * 0.9
//   cutout: square of side level * 0.5 * min(h, w)
Tensor apply_rand_op(const Tensor& image, RandOp op, int m, double sign, std::size_t cy, std::size_t cx) {
  require_raster(image, "apply_rand_op");
  if (m == 0) return image;  // warps would still resample
  const double level = static_cast<double>(m) / 30.0;
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const double my = (static_cast<double>(h) - 1.0) / 2.0;
  const double mx = (static_cast<double>(w) - 1.0) / 2.0;
  switch (op) {
    case RandOp::translate_x: {
      const double shift = sign * std::round(level * 0.3 * static_cast<double>(w));
      return warp(image, [=](double y, double x) { return std::pair{y, x - shift}; });
    }
    case RandOp::translate_y: {
      const double shift = sign * std::round(level * 0.3 * static_cast<double>(h));
      return warp(image, [=](double y, double x) { return std::pair{y - shift, x}; });
    }
    case RandOp::rotate: {
      const double theta = sign * level * std::numbers::pi / 6.0;
      const double ct = std::cos(theta), st = std::sin(theta);
      return warp(image, [=](double y, double x) {
        const double ry = y - my, rx = x - mx;
        return std::pair{my + ct * ry - st * rx, mx + st * ry + ct * rx};
      });
    }
    case RandOp::shear_x: {
      const double s = sign * level * 0.3;
      return warp(image, [=](double y, double x) { return std::pair{y, x + s * (y - my)}; });
    }
    case RandOp::shear_y: {
      const double s = sign * level * 0.3;
      return warp(image, [=](double y, double x) { return std::pair{y + s * (x - mx), x}; });
    }
    case RandOp::brightness: {
      const double factor = 1.0 + sign * level * 0.9;
      Tensor out = image;
      for (auto& v : out.data()) v = std::clamp(v * factor, 0.0, 1.0);
      return out;
    }
    case RandOp::contrast: {
      const double factor = 1.0 + sign * level * 0.9;
      Tensor out = image;
      const std::size_t plane = h * w;
      for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (std::size_t p = 0; p < plane; ++p) mean += image[ch * plane + p];
        mean /= static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) {
          auto& v = out[ch * plane + p];
          v = std::clamp(mean + factor * (v - mean), 0.0, 1.0);
        }
      }
      return out;
    }
    case RandOp::cutout: {
      const auto side = static_cast<std::size_t>(std::lround(level * 0.5 * static_cast<double>(std::min(h, w))));
      Tensor out = image;
      if (side == 0) return out;
      const long y0 = static_cast<long>(cy) - static_cast<long>(side / 2);
      const long x0 = static_cast<long>(cx) - static_cast<long>(side / 2);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (long y = std::max(0L, y0); y < std::min(static_cast<long>(h), y0 + static_cast<long>(side)); ++y)
          for (long x = std::max(0L, x0); x < std::min(static_cast<long>(w), x0 + static_cast<long>(side)); ++x)
            out[(ch * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] = 0.0;
      return out;
    }
  }
  return image;
}

RandAugmentResult rand_augment(const Tensor& x, int n, int m, Rng& rng, std::span<const double> feature_std) {
  if (n < 1) throw InvalidInput("rand_augment: N must be >= 1");
  if (m < 0 || m > 30) throw InvalidInput("rand_augment: M must be in [0, 30]");
  if (x.rank() != 3) return {jitter(x, rng, feature_std), {"jitter"}};

  const auto& pool = randaug_pool();
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> row(0, x.dim(1) - 1);
  std::uniform_int_distribution<std::size_t> col(0, x.dim(2) - 1);
  RandAugmentResult result{x, {}};
  for (int i = 0; i < n; ++i) {
    const RandOp op = pool[pick(rng)];
    const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    const std::size_t cy = row(rng);
    const std::size_t cx = col(rng);
    result.image = apply_rand_op(result.image, op, m, sign, cy, cx);
    result.ops.emplace_back(rand_op_name(op));
  }
  return result;
}

Augmenter::Augmenter(AugMode mode, std::vector<double> feature_std)
    : mode_(mode), feature_std_(std::move(feature_std)) {
  mode_.validate();
}

Tensor Augmenter::apply(const Tensor& x, Rng& rng) const {
  switch (mode_.kind) {
    case AugKind::none: return x;
    case AugKind::simple: return simple_augment(x, rng, feature_std_);
    case AugKind::randaug: return rand_augment(x, mode_.n, mode_.m, rng, feature_std_).image;
  }
  return x;
}

}  // namespace membench::data
