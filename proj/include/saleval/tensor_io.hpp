#pragma once

#include "saleval/tensors.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saleval {

/// Raw tensor file ("TNSR"):
///   magic   'T' 'N' 'S' 'R'
///   version u8 = 1
///   ndim    u8 in {2, 3}
///   dims    ndim x u32 little-endian
///   payload prod(dims) x float32 little-endian, row-major (channel-last for ndim = 3)
enum class FormatErrc {
  kBadMagic,
  kBadVersion,
  kBadRank,
  kDimensionOverflow,
  kTruncated,
  kTrailingBytes,
  kMalformedHeader,
  kUnsupportedMaxval,
  kOutOfRange,
  kIo,
};

const char* to_string(FormatErrc code);

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  FormatErrc code() const { return code_; }

 private:
  FormatErrc code_;
};

/// Decoded TNSR contents with dims in file order.
struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

std::vector<std::uint8_t> encode_tnsr(const RawTensor& tensor);
RawTensor decode_tnsr(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_map(const SaliencyMap& map);
SaliencyMap decode_map(std::span<const std::uint8_t> bytes);

/// 2-D tensors decode as single-channel images, 3-D as H x W x C.
std::vector<std::uint8_t> encode_image(const Image& image);
Image decode_image_tnsr(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

SaliencyMap load_map(const std::filesystem::path& path);
void save_map(const std::filesystem::path& path, const SaliencyMap& map);

}  // namespace saleval
