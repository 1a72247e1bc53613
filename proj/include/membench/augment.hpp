#pragma once

#include <span>
#include <string>
#include <vector>

#include "membench/data.hpp"
#include "membench/rng.hpp"
#include "membench/tensor.hpp"

namespace membench::data {

enum class AugKind { none, simple, randaug };

struct AugMode {
  AugKind kind = AugKind::none;
  int n = 2;   // randaug: transformations per sample
  int m = 10;  // randaug: magnitude on a 0..30 scale

  void validate() const;
};

const char* aug_kind_name(AugKind kind);
AugKind parse_aug_kind(const std::string& name);

inline constexpr std::size_t kCropPadding = 4;
inline constexpr double kJitterScale = 0.05;

// Mirror along the width axis.
nn::Tensor hflip(const nn::Tensor& image);

// Edge-replicate `pad` pixels on every side, then crop the original extent at
// (dy, dx) within the padded canvas. (pad, pad) is the identity.
nn::Tensor pad_crop(const nn::Tensor& image, std::size_t pad, std::size_t dy, std::size_t dx);

// Gaussian noise with per-feature sigma kJitterScale * feature_std (unit std
// when feature_std is empty).
nn::Tensor jitter(const nn::Tensor& x, Rng& rng, std::span<const double> feature_std);

// Random crop with padding 4 plus a horizontal flip with probability 1/2.
// Non-raster inputs fall back to jitter.
nn::Tensor simple_augment(const nn::Tensor& x, Rng& rng, std::span<const double> feature_std = {});

enum class RandOp { translate_x, translate_y, rotate, shear_x, shear_y, brightness, contrast, cutout };

const std::vector<RandOp>& randaug_pool();
const char* rand_op_name(RandOp op);

// Applies one op at magnitude m (0..30). `sign` is +1 or -1 for the signed
// ops; `cy`, `cx` locate the cutout square. m == 0 is the identity for every op.
nn::Tensor apply_rand_op(const nn::Tensor& image, RandOp op, int m, double sign, std::size_t cy = 0,
                         std::size_t cx = 0);

struct RandAugmentResult {
  nn::Tensor image;
  std::vector<std::string> ops;  // names of the drawn ops, in application order
};

// Draws n ops uniformly (with replacement) from randaug_pool() and applies
// each at magnitude m. Non-raster inputs fall back to jitter.
RandAugmentResult rand_augment(const nn::Tensor& x, int n, int m, Rng& rng, std::span<const double> feature_std = {});

/// Training-time augmentation bound to one dataset's feature statistics.
class Augmenter {
 public:
  Augmenter() = default;
  Augmenter(AugMode mode, std::vector<double> feature_std);
  Augmenter(AugMode mode, const Dataset& ds) : Augmenter(mode, feature_std(ds)) {}

  const AugMode& mode() const { return mode_; }
  nn::Tensor apply(const nn::Tensor& x, Rng& rng) const;

 private:
  AugMode mode_;
  std::vector<double> feature_std_;
};

}  // namespace membench::data
