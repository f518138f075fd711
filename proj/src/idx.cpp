#include "fbench/idx.hpp"

#include <fstream>
#include <string>

#include <zlib.h>

#include "fbench/error.hpp"

namespace fb {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

std::size_t IdxTensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("IDX file shorter than its magic number", bytes.size());
  const std::uint32_t magic = read_be32(bytes, 0);
  std::size_t rank = 0;
  if (magic == kIdxImageMagic) {
    rank = 3;
  } else if (magic == kIdxLabelMagic) {
    rank = 1;
  } else {
    throw FormatError("unrecognized IDX magic number", 0);
  }

  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw FormatError("IDX header truncated", bytes.size());

  IdxTensor tensor;
  std::size_t payload = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    tensor.dims.push_back(read_be32(bytes, 4 + 4 * d));
    payload *= tensor.dims.back();
  }
  const std::size_t expected = header + payload;
  if (bytes.size() < expected) throw FormatError("IDX payload truncated", bytes.size());
  if (bytes.size() > expected) throw FormatError("trailing bytes after IDX payload", expected);
  tensor.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return tensor;
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor) {
  std::uint32_t magic = 0;
  if (tensor.dims.size() == 3) {
    magic = kIdxImageMagic;
  } else if (tensor.dims.size() == 1) {
    magic = kIdxLabelMagic;
  } else {
    throw UsageError("only 1-d label and 3-d image tensors can be encoded");
  }
  if (tensor.data.size() != tensor.element_count())
    throw ShapeError("IDX payload size does not match its dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * tensor.dims.size() + tensor.data.size());
  append_be32(out, magic);
  for (std::uint32_t d : tensor.dims) append_be32(out, d);
  out.insert(out.end(), tensor.data.begin(), tensor.data.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int code = 0;
      const std::string msg = gzerror(file, &code);
      gzclose(file);
      throw IoError("cannot read " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(file);
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                      bool gzip) {
  if (gzip) {
    gzFile file = gzopen(path.c_str(), "wb");
    if (file == nullptr) throw IoError("cannot create " + path.string());
    const int written = bytes.empty() ? 0 : gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int closed = gzclose(file);
    if (written != static_cast<int>(bytes.size()) || closed != Z_OK)
      throw IoError("cannot write " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace fb
