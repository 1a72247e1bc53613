#include "membench/checkpoint.hpp"

#include <fstream>

#include "membench/binary_io.hpp"
#include "membench/error.hpp"

namespace membench::nn {

namespace {
constexpr char kMagic[4] = {'M', 'D', 'C', 'K'};
}

void write_checkpoint(std::ostream& out, const ParamSet& params) {
  out.write(kMagic, 4);
  io::put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& p : params) {
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& t = p.var.value();
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (double v : t.data()) io::put_le<double>(out, v);
  }
  if (!out) throw IoError("checkpoint write failed");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint: bad magic");
  const auto version = io::get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

  std::vector<NamedTensor> out;
  std::uint32_t name_len = 0;
  while (io::try_get_le(in, name_len, "name length")) {
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (static_cast<std::uint32_t>(in.gcount()) != name_len) throw FormatError("truncated tensor name");
    const auto rank = io::get_le<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) e = io::get_le<std::uint32_t>(in, "extent");
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = io::get_le<double>(in, "payload");
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

void restore(ParamSet& params, const std::vector<NamedTensor>& saved) {
  if (saved.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(saved.size()) + " tensors, model has " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (saved[i].name != params[i].name || saved[i].tensor.shape() != params[i].var.shape()) {
      throw FormatError("checkpoint tensor " + saved[i].name + " does not match parameter " + params[i].name);
    }
    params[i].var.mutable_value() = saved[i].tensor;
  }
}

}  // namespace membench::nn
