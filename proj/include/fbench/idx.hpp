#pragma once

// IDX container format used by the MNIST-family datasets: a big-endian magic
// (0x00000803 for image files, 0x00000801 for label files), one big-endian
// uint32 per dimension, then the row-major unsigned-byte payload.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fb {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
};

// Throws FormatError naming the offending byte offset.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

// Inverse of parse_idx for 1-d (labels) and 3-d (images) tensors.
std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);

// Reads a file, transparently inflating gzip content. Throws IoError.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Writes bytes, gzip-compressed when `gzip` is set. Throws IoError.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                      bool gzip = false);

}  // namespace fb
