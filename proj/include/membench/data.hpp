#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "membench/tensor.hpp"

namespace membench::data {

/// Labeled samples. A sample is either a feature vector [d] or a raster [c, h, w].
struct Dataset {
  std::vector<nn::Tensor> samples;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return samples.size(); }
  const nn::Shape& sample_shape() const;
  bool is_raster() const { return !samples.empty() && samples.front().rank() == 3; }

  // Throws ValidationError when an invariant is broken.
  void validate() const;

  nn::Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> labels_of(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

enum class Part : std::size_t {
  target_train = 0,
  target_reference,
  target_test,
  shadow_train,
  shadow_reference,
  shadow_test,
};

/// Six disjoint, equal-sized index sets.
struct SplitPlan {
  std::array<std::vector<std::size_t>, 6> parts;
  std::vector<std::size_t> unassigned;  // dropped by truncation to a multiple of 6
  std::uint64_t seed = 0;

  const std::vector<std::size_t>& operator[](Part p) const { return parts[static_cast<std::size_t>(p)]; }
  std::size_t part_size() const { return parts[0].size(); }
};

const char* part_name(Part p);

// Shuffles with `seed`, truncates to the largest multiple of 6, cuts six parts.
SplitPlan six_way_split(std::size_t dataset_size, std::uint64_t seed);
inline SplitPlan six_way_split(const Dataset& ds, std::uint64_t seed) { return six_way_split(ds.size(), seed); }

// Isotropic unit-variance Gaussian per class. Class means depend only on
// (k, dim, separation, mean_shift), so two draws with different seeds share a
// distribution. Pairwise distance between class means equals `separation`
// when k <= dim.
Dataset synth_gaussian(std::size_t k, std::size_t dim, std::size_t n_per_class, double class_separation,
                       std::uint64_t seed, double mean_shift = 0.0);

// c x h x w rasters in [0, 1]: a per-class smooth template scaled by
// `contrast` around 0.5, plus Gaussian pixel noise, clipped.
Dataset synth_raster(std::size_t k, std::size_t channels, std::size_t height, std::size_t width,
                     std::size_t n_per_class, double contrast, double noise, std::uint64_t seed);

enum class DataFormat { csv, raw_raster };

Dataset read_csv(std::istream& in, std::optional<std::size_t> num_classes = std::nullopt);
void write_csv(std::ostream& out, const Dataset& ds);

// "MDIM" | u32 count | u32 c | u32 h | u32 w | u32 k | f32 pixels | u16 labels (little-endian)
Dataset read_raster(std::istream& in);
void write_raster(std::ostream& out, const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     std::optional<std::size_t> num_classes = std::nullopt);
void save_dataset(const std::filesystem::path& path, const Dataset& ds, DataFormat format);

// Per-feature standard deviation over the whole dataset (flattened samples).
std::vector<double> feature_std(const Dataset& ds);

}  // namespace membench::data
