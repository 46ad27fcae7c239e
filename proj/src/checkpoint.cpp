#include "mecvr/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace mecvr {

namespace {

static_assert(sizeof(double) == 8, "checkpoints assume 64-bit doubles");

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
  auto bits = to_little(std::bit_cast<std::uint64_t>(v));
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
  return to_little(v);
}

double read_f64(std::istream& in) {
  std::uint64_t bits = 0;
  if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw CheckpointError("checkpoint truncated");
  return std::bit_cast<double>(to_little(bits));
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::ConstParamList& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    write_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    write_u32(out, static_cast<std::uint32_t>(p->value.cols()));
  }
  for (const auto* p : params)
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) write_f64(out, p->value(i, j));
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

void load_checkpoint(const std::string& path, const nn::ParamList& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint file");
  const auto version = read_u32(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_u32(in);
  if (count != params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                          std::to_string(params.size()));
  for (const auto* p : params) {
    const auto len = read_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("checkpoint truncated");
    const auto rows = read_u32(in);
    const auto cols = read_u32(in);
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      throw CheckpointError("tensor '" + name + "' does not match '" + p->name + "'");
  }
  std::vector<nn::Matrix> values;
  for (const auto* p : params) {
    nn::Matrix m(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64(in);
    values.push_back(std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = std::move(values[k]);
}

}  // namespace mecvr
