#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "mecvr/nn.hpp"

// Flat binary parameter file:
//   "MECVRCKP" | u32 version | u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rows, u32 cols
//   then all values, tensor by tensor, row-major little-endian f64.
namespace mecvr {

inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'C', 'V', 'R', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const nn::ConstParamList& params);
/// Names and shapes in the file must match `params` exactly, in order.
void load_checkpoint(const std::string& path, const nn::ParamList& params);

}  // namespace mecvr
