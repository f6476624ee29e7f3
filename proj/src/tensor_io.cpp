#include "saleval/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace saleval {

const char* to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::kBadMagic: return "bad magic";
    case FormatErrc::kBadVersion: return "unsupported version";
    case FormatErrc::kBadRank: return "unsupported rank";
    case FormatErrc::kDimensionOverflow: return "dimension overflow";
    case FormatErrc::kTruncated: return "truncated payload";
    case FormatErrc::kTrailingBytes: return "trailing bytes";
    case FormatErrc::kMalformedHeader: return "malformed header";
    case FormatErrc::kUnsupportedMaxval: return "unsupported maxval";
    case FormatErrc::kOutOfRange: return "value out of range";
    case FormatErrc::kIo: return "i/o error";
  }
  return "unknown";
}

void validate_unit_range(const Image& image) {
  for (Index c = 0; c < image.channels(); ++c) {
    const auto& p = image.plane(c);
    if (!p.allFinite() || p.minCoeff() < 0.0 || p.maxCoeff() > 1.0) {
      throw FormatError(FormatErrc::kOutOfRange, "image samples must be finite and in [0,1]");
    }
  }
}

void validate_finite(const SaliencyMap& map) {
  if (map.size() == 0 || !map.allFinite()) {
    throw FormatError(FormatErrc::kOutOfRange, "saliency map must be non-empty and finite");
  }
}

Index block_factor(Index image_h, Index image_w, Index map_h, Index map_w) {
  if (map_h < 1 || map_w < 1 || image_h % map_h != 0 || image_w % map_w != 0 ||
      image_h / map_h != image_w / map_w) {
    throw DimensionError("image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                         " is not an integer block multiple of map " + std::to_string(map_h) +
                         "x" + std::to_string(map_w));
  }
  return image_h / map_h;
}

namespace {

constexpr std::uint8_t kMagic[4] = {0x54, 0x4E, 0x53, 0x52};
constexpr std::uint8_t kVersion = 1;
// Caps the element count well below anything addressable so that
// a corrupt header cannot trigger a giant allocation.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_tnsr(const RawTensor& tensor) {
  if (tensor.dims.size() != 2 && tensor.dims.size() != 3) {
    throw FormatError(FormatErrc::kBadRank, "TNSR supports 2 or 3 dimensions");
  }
  std::uint64_t count = 1;
  for (auto d : tensor.dims) count *= d;
  if (count != tensor.values.size()) {
    throw FormatError(FormatErrc::kMalformedHeader, "payload size does not match dims");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  out.reserve(out.size() + 4 * tensor.values.size());
  for (float f : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

RawTensor decode_tnsr(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(FormatErrc::kBadMagic, "expected 'TNSR'");
  }
  if (bytes.size() < 6) throw FormatError(FormatErrc::kTruncated, "header cut short");
  if (bytes[4] != kVersion) {
    throw FormatError(FormatErrc::kBadVersion, "version " + std::to_string(bytes[4]));
  }
  const std::size_t ndim = bytes[5];
  if (ndim != 2 && ndim != 3) {
    throw FormatError(FormatErrc::kBadRank, "ndim " + std::to_string(ndim));
  }
  const std::size_t header = 6 + 4 * ndim;
  if (bytes.size() < header) throw FormatError(FormatErrc::kTruncated, "dims cut short");

  RawTensor t;
  std::uint64_t count = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    const std::uint32_t dim = get_u32(bytes.data() + 6 + 4 * d);
    count *= dim;
    if (count > kMaxElements) {
      throw FormatError(FormatErrc::kDimensionOverflow, "element count exceeds 2^32");
    }
    t.dims.push_back(dim);
  }
  const std::uint64_t need = header + 4 * count;
  if (bytes.size() < need) {
    throw FormatError(FormatErrc::kTruncated, "expected " + std::to_string(need) + " bytes, got " +
                                                  std::to_string(bytes.size()));
  }
  if (bytes.size() > need) throw FormatError(FormatErrc::kTrailingBytes, "data after payload");
  t.values.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    t.values[k] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * k));
  }
  return t;
}

std::vector<std::uint8_t> encode_map(const SaliencyMap& map) {
  RawTensor t;
  t.dims = {static_cast<std::uint32_t>(map.rows()), static_cast<std::uint32_t>(map.cols())};
  t.values.resize(static_cast<std::size_t>(map.size()));
  Eigen::Map<Grid<float>>(t.values.data(), map.rows(), map.cols()) = map.cast<float>();
  return encode_tnsr(t);
}

SaliencyMap decode_map(std::span<const std::uint8_t> bytes) {
  RawTensor t = decode_tnsr(bytes);
  if (t.dims.size() != 2) throw FormatError(FormatErrc::kBadRank, "saliency maps are 2-D");
  if (t.dims[0] == 0 || t.dims[1] == 0) {
    throw FormatError(FormatErrc::kMalformedHeader, "empty saliency map");
  }
  SaliencyMap map = Eigen::Map<const Grid<float>>(t.values.data(), t.dims[0], t.dims[1])
                        .cast<double>();
  validate_finite(map);
  return map;
}

std::vector<std::uint8_t> encode_image(const Image& image) {
  RawTensor t;
  t.dims = {static_cast<std::uint32_t>(image.height()), static_cast<std::uint32_t>(image.width()),
            static_cast<std::uint32_t>(image.channels())};
  for (double v : image.interleaved()) t.values.push_back(static_cast<float>(v));
  return encode_tnsr(t);
}

Image decode_image_tnsr(std::span<const std::uint8_t> bytes) {
  RawTensor t = decode_tnsr(bytes);
  const std::uint32_t channels = t.dims.size() == 3 ? t.dims[2] : 1;
  if (t.dims[0] == 0 || t.dims[1] == 0 || (channels != 1 && channels != 3)) {
    throw FormatError(FormatErrc::kMalformedHeader, "image must be HxW or HxWxC with C in {1,3}");
  }
  std::vector<double> data(t.values.begin(), t.values.end());
  Image img = Image::from_interleaved(t.dims[0], t.dims[1], channels, data);
  validate_unit_range(img);
  return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrc::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatErrc::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrc::kIo, "write failed for " + path.string());
}

SaliencyMap load_map(const std::filesystem::path& path) { return decode_map(read_file(path)); }

void save_map(const std::filesystem::path& path, const SaliencyMap& map) {
  write_file(path, encode_map(map));
}

}  // namespace saleval
