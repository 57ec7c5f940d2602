#ifndef LT_TENSOR_IO_HPP
#define LT_TENSOR_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "lt/tensor.hpp"

namespace lt {

// On-disk tensor container:
//   8-byte magic "LTTENSR1"
//   u32 little-endian header length
//   UTF-8 JSON header {"shape":[...],"dtype":"f64","lengths":[...]?}
//   payload: little-endian f64, row-major
// write_tensor / read_tensor round-trip bit-for-bit.

struct StoredTensor {
  Tensor data;
  std::optional<std::vector<std::size_t>> lengths;
};

void write_tensor(const Tensor& t, const std::filesystem::path& path);
void write_batch_grid(const BatchGrid& grid, const std::filesystem::path& path);

StoredTensor read_tensor(const std::filesystem::path& path);
BatchGrid read_batch_grid(const std::filesystem::path& path);

// Stream variants (the file API wraps these).
void write_tensor_stream(const Tensor& t,
                         const std::optional<std::vector<std::size_t>>& lengths,
                         std::ostream& out);
StoredTensor read_tensor_stream(std::istream& in);

}  // namespace lt

#endif  // LT_TENSOR_IO_HPP
