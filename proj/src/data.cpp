#include "membench/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "membench/binary_io.hpp"
#include "membench/error.hpp"
#include "membench/rng.hpp"

namespace membench::data {

using nn::Shape;
using nn::Tensor;

const Shape& Dataset::sample_shape() const {
  if (samples.empty()) throw ValidationError("empty dataset has no sample shape");
  return samples.front().shape();
}

void Dataset::validate() const {
  if (samples.size() != labels.size()) {
    throw ValidationError("dataset has " + std::to_string(samples.size()) + " samples but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 2) throw ValidationError("dataset needs at least 2 classes");
  if (samples.empty()) return;
  const auto& shape = samples.front().shape();
  if (shape.size() != 1 && shape.size() != 3) {
    throw ValidationError("samples must be vectors or c x h x w rasters, got " + nn::shape_str(shape));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != shape) throw ValidationError("sample " + std::to_string(i) + " has a different shape");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                            " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  std::vector<Tensor> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(samples.at(i));
  return nn::stack(picked);
}

std::vector<int> Dataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  for (auto i : indices) {
    out.samples.push_back(samples.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

const char* part_name(Part p) {
  switch (p) {
    case Part::target_train: return "target_train";
    case Part::target_reference: return "target_reference";
    case Part::target_test: return "target_test";
    case Part::shadow_train: return "shadow_train";
    case Part::shadow_reference: return "shadow_reference";
    case Part::shadow_test: return "shadow_test";
  }
  return "?";
}

SplitPlan six_way_split(std::size_t dataset_size, std::uint64_t seed) {
  if (dataset_size < 6) {
    throw InvalidInput("six_way_split needs at least 6 samples, got " + std::to_string(dataset_size));
  }
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SplitPlan plan;
  plan.seed = seed;
  const std::size_t part = dataset_size / 6;
  for (std::size_t p = 0; p < 6; ++p) {
    plan.parts[p].assign(order.begin() + static_cast<std::ptrdiff_t>(p * part),
                         order.begin() + static_cast<std::ptrdiff_t>((p + 1) * part));
  }
  plan.unassigned.assign(order.begin() + static_cast<std::ptrdiff_t>(6 * part), order.end());
  std::sort(plan.unassigned.begin(), plan.unassigned.end());
  return plan;
}

namespace {

// Fixed stream for distribution parameters, independent of the sample seed.
constexpr std::uint64_t kDistributionSeed = 0x6d656d62656e6368ULL;

}  // namespace

Dataset synth_gaussian(std::size_t k, std::size_t dim, std::size_t n_per_class, double class_separation,
                       std::uint64_t seed, double mean_shift) {
  if (k < 2) throw InvalidInput("synth_gaussian: k must be >= 2");
  if (dim < 1) throw InvalidInput("synth_gaussian: dim must be >= 1");
  if (n_per_class < 1) throw InvalidInput("synth_gaussian: n_per_class must be >= 1");

  const double radius = class_separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means(k, std::vector<double>(dim, mean_shift));
  if (k <= dim) {
    for (std::size_t c = 0; c < k; ++c) means[c][c] += radius;
  } else {
    Rng mrng(mix_seed(kDistributionSeed, k * 1000003ULL + dim));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& m : means) {
      std::vector<double> dir(dim);
      double norm = 0.0;
      for (auto& v : dir) {
        v = normal(mrng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < dim; ++j) m[j] += radius * dir[j] / norm;
    }
  }

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.num_classes = k;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      Tensor x(Shape{dim});
      for (std::size_t j = 0; j < dim; ++j) x[j] = means[c][j] + noise(rng);
      ds.samples.push_back(std::move(x));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

Dataset synth_raster(std::size_t k, std::size_t channels, std::size_t height, std::size_t width,
                     std::size_t n_per_class, double contrast, double noise, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("synth_raster: k must be >= 2");
  if (channels < 1 || height < 1 || width < 1) throw InvalidInput("synth_raster: raster extents must be positive");
  if (n_per_class < 1) throw InvalidInput("synth_raster: n_per_class must be >= 1");

  // Each class template is a sum of three Gaussian blobs, rescaled to [-1, 1].
  Rng trng(mix_seed(kDistributionSeed, ((k * 131 + channels) * 131 + height) * 131 + width));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t pixels = channels * height * width;
  std::vector<std::vector<double>> templates(k, std::vector<double>(pixels, 0.0));
  for (auto& tpl : templates) {
    for (int blob = 0; blob < 3; ++blob) {
      const double cy = unit(trng) * static_cast<double>(height);
      const double cx = unit(trng) * static_cast<double>(width);
      const double sigma = 0.15 * static_cast<double>(std::max(height, width)) * (0.5 + unit(trng));
      const double sign = unit(trng) < 0.5 ? -1.0 : 1.0;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double weight = 0.5 + unit(trng);
        for (std::size_t y = 0; y < height; ++y)
          for (std::size_t x = 0; x < width; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            tpl[(ch * height + y) * width + x] += sign * weight * std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
          }
      }
    }
    double peak = 0.0;
    for (double v : tpl) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
      for (double& v : tpl) v /= peak;
  }

  Rng rng(seed);
  std::normal_distribution<double> pixel_noise(0.0, noise);
  Dataset ds;
  ds.num_classes = k;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      Tensor img(Shape{channels, height, width});
      for (std::size_t p = 0; p < pixels; ++p) {
        const double v = 0.5 + 0.5 * contrast * templates[c][p] + (noise > 0.0 ? pixel_noise(rng) : 0.0);
        img[p] = std::clamp(v, 0.0, 1.0);
      }
      ds.samples.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

Dataset read_csv(std::istream& in, std::optional<std::size_t> num_classes) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 2) {
      throw FormatError("line " + std::to_string(line_no) + ": expected features followed by a label");
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " features, got " +
                        std::to_string(fields.size() - 1));
    }
    Tensor x(Shape{dim});
    for (std::size_t j = 0; j < dim; ++j) {
      std::size_t used = 0;
      try {
        x[j] = std::stod(fields[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || fields[j].find_first_not_of(" \t", used) != std::string::npos) {
        throw FormatError("line " + std::to_string(line_no) + ", field " + std::to_string(j + 1) +
                          ": not a number: '" + fields[j] + "'");
      }
    }
    long label = 0;
    std::size_t used = 0;
    try {
      label = std::stol(fields.back(), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || fields.back().find_first_not_of(" \t", used) != std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": label is not an integer: '" + fields.back() + "'");
    }
    if (label < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative label");
    max_label = std::max(max_label, static_cast<int>(label));
    ds.samples.push_back(std::move(x));
    ds.labels.push_back(static_cast<int>(label));
  }
  ds.num_classes = num_classes.value_or(static_cast<std::size_t>(std::max(max_label + 1, 2)));
  ds.validate();
  return ds;
}

void write_csv(std::ostream& out, const Dataset& ds) {
  ds.validate();
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.samples[i].data()) buf << v << ',';
    buf << ds.labels[i] << '\n';
  }
  out << buf.str();
}

namespace {
constexpr char kRasterMagic[4] = {'M', 'D', 'I', 'M'};
}

Dataset read_raster(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kRasterMagic, 4) != 0) throw FormatError("not a raster file: bad magic");
  const auto count = io::get_le<std::uint32_t>(in, "count");
  const auto c = io::get_le<std::uint32_t>(in, "channels");
  const auto h = io::get_le<std::uint32_t>(in, "height");
  const auto w = io::get_le<std::uint32_t>(in, "width");
  const auto k = io::get_le<std::uint32_t>(in, "class count");
  if (c == 0 || h == 0 || w == 0) throw FormatError("raster header declares a zero extent");

  const std::size_t pixels = static_cast<std::size_t>(c) * h * w;
  const std::size_t expected = static_cast<std::size_t>(count) * (pixels * 4 + 2);
  std::vector<unsigned char> payload(expected);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(expected));
  const auto actual = static_cast<std::size_t>(in.gcount());
  if (actual != expected) {
    throw FormatError("truncated raster payload: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
  }

  Dataset ds;
  ds.num_classes = k;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Tensor img(Shape{c, h, w});
    for (std::size_t p = 0; p < pixels; ++p) {
      const unsigned char* b = payload.data() + (i * pixels + p) * 4;
      std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      float f = 0.0f;
      std::memcpy(&f, &bits, 4);
      img[p] = static_cast<double>(f);
    }
    ds.samples.push_back(std::move(img));
  }
  const std::size_t label_base = static_cast<std::size_t>(count) * pixels * 4;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* b = payload.data() + label_base + i * 2;
    ds.labels.push_back(static_cast<int>(static_cast<std::uint16_t>(b[0] | (b[1] << 8))));
  }
  ds.validate();
  return ds;
}

void write_raster(std::ostream& out, const Dataset& ds) {
  ds.validate();
  if (!ds.is_raster()) throw InvalidInput("write_raster: dataset samples are not rasters");
  const auto& s = ds.sample_shape();
  out.write(kRasterMagic, 4);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
  for (auto e : s) io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_classes));
  for (const auto& img : ds.samples)
    for (double v : img.data()) io::put_le<float>(out, static_cast<float>(v));
  for (int label : ds.labels) io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(label));
  if (!out) throw IoError("raster write failed");
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format, std::optional<std::size_t> num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (format == DataFormat::csv) return read_csv(in, num_classes);
  Dataset ds = read_raster(in);
  if (num_classes && *num_classes != ds.num_classes) {
    throw ValidationError("raster declares " + std::to_string(ds.num_classes) + " classes, expected " +
                          std::to_string(*num_classes));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds, DataFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == DataFormat::csv) {
    write_csv(out, ds);
  } else {
    write_raster(out, ds);
  }
}

std::vector<double> feature_std(const Dataset& ds) {
  if (ds.samples.empty()) return {};
  const std::size_t d = ds.samples.front().numel();
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  for (const auto& s : ds.samples)
    for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
  const double n = static_cast<double>(ds.size());
  for (auto& m : mean) m /= n;
  for (const auto& s : ds.samples)
    for (std::size_t j = 0; j < d; ++j) sq[j] += (s[j] - mean[j]) * (s[j] - mean[j]);
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = std::sqrt(sq[j] / n);
  return out;
}

}  // namespace membench::data
