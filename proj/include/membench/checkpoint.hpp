#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "membench/nn.hpp"

namespace membench::nn {

// Binary parameter checkpoint, little-endian:
//   "MDCK" | u32 version
//   repeated until EOF: u32 name_len | name | u32 rank | u32 extents[rank] | f64 payload[numel]
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_checkpoint(std::ostream& out, const ParamSet& params);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `params`, matching by name and shape.
void restore(ParamSet& params, const std::vector<NamedTensor>& saved);

}  // namespace membench::nn
