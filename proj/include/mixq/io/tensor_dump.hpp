#pragma once

// Binary tensor dump, little-endian:
//
//   "MIXQTNSR"        8 bytes magic
//   version           u32 (1)
//   dtype             u32 (1 = float64)
//   ndim              u32
//   shape[ndim]       u64 each
//   payload           product(shape) float64, row-major
//   checksum          32 bytes, SHA-256 of everything above

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mixq::io {

inline constexpr std::uint32_t kTensorDumpVersion = 1;
inline constexpr std::uint32_t kDtypeFloat64 = 1;

struct TensorDump {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  std::uint64_t numel() const;
};

std::string encode_tensor(const TensorDump& t);
// Throws DataError on bad magic, unknown version/dtype, length mismatch or
// checksum failure.
TensorDump decode_tensor(std::string_view bytes);

}  // namespace mixq::io
