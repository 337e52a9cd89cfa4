#include "advmask/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>

#include "advmask/errors.hpp"

namespace advmask::nd {
namespace {

constexpr char kMagic[8] = {'A', 'M', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  char b[8];
  if (!in.read(b, 8)) throw DataError("checkpoint truncated: " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, NodePtr>>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, params.size());
  for (const auto& [name, node] : params) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor& t = node->value;
    write_u64(out, t.rows());
    write_u64(out, t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) {
      write_u64(out, std::bit_cast<std::uint64_t>(t.data()[i]));
    }
  }
  if (!out) throw DataError("write failed for checkpoint: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  std::uint64_t count = read_u64(in, path);
  std::map<std::string, Tensor> out;
  for (std::uint64_t e = 0; e < count; ++e) {
    std::uint64_t name_len = read_u64(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw DataError("checkpoint truncated: " + path);
    }
    std::uint64_t rows = read_u64(in, path);
    std::uint64_t cols = read_u64(in, path);
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.data()[i] = std::bit_cast<double>(read_u64(in, path));
    }
    if (!out.emplace(std::move(name), std::move(t)).second) {
      throw DataError("duplicate parameter name in checkpoint: " + path);
    }
  }
  return out;
}

void load_checkpoint_into(const std::string& path,
                          const std::vector<std::pair<std::string, NodePtr>>& params) {
  auto loaded = load_checkpoint(path);
  for (const auto& [name, node] : params) {
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      throw DataError("checkpoint " + path + " is missing parameter '" + name + "'");
    }
    if (!it->second.same_shape(node->value)) {
      throw DataError("checkpoint " + path + " parameter '" + name + "' has shape " +
                      it->second.shape_str() + ", expected " + node->value.shape_str());
    }
    node->value = it->second;
  }
}

}  // namespace advmask::nd
