#include "saleval/image_io.hpp"

#include <cctype>
#include <cmath>

namespace saleval {
namespace {

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  unsigned long next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw FormatError(FormatErrc::kMalformedHeader, "expected a decimal field");
    }
    unsigned long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1ul << 31)) throw FormatError(FormatErrc::kDimensionOverflow, "header field too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError(FormatErrc::kMalformedHeader, "missing separator before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

Image decode_pnm(std::span<const std::uint8_t> bytes, Index channels) {
  const char expect = channels == 1 ? '5' : '6';
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<std::uint8_t>(expect)) {
    throw FormatError(FormatErrc::kMalformedHeader,
                      std::string("expected binary P") + expect + " header");
  }
  PnmHeaderReader reader(bytes);
  const auto width = static_cast<Index>(reader.next_number());
  const auto height = static_cast<Index>(reader.next_number());
  const auto maxval = reader.next_number();
  if (width < 1 || height < 1) throw FormatError(FormatErrc::kMalformedHeader, "zero dimension");
  if (maxval != 255 && maxval != 65535) {
    throw FormatError(FormatErrc::kUnsupportedMaxval, "maxval " + std::to_string(maxval));
  }
  const std::size_t offset = reader.raster_offset();
  const std::size_t sample_bytes = maxval == 255 ? 1 : 2;
  const std::size_t count = static_cast<std::size_t>(width * height * channels);
  if (bytes.size() - offset < count * sample_bytes) {
    throw FormatError(FormatErrc::kTruncated, "raster shorter than header declares");
  }
  std::vector<double> data(count);
  const double scale = static_cast<double>(maxval);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint8_t* p = bytes.data() + offset + k * sample_bytes;
    // 16-bit samples are big-endian.
    const unsigned v = sample_bytes == 1 ? p[0] : (unsigned{p[0]} << 8) | p[1];
    data[k] = v / scale;
  }
  return Image::from_interleaved(height, width, channels, data);
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes, ImageFormat format) {
  switch (format) {
    case ImageFormat::kPgm: return decode_pnm(bytes, 1);
    case ImageFormat::kPpm: return decode_pnm(bytes, 3);
    case ImageFormat::kTnsr: return decode_image_tnsr(bytes);
  }
  throw FormatError(FormatErrc::kMalformedHeader, "unknown image format");
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_image(bytes, ImageFormat::kPgm);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_image(bytes, ImageFormat::kPpm);
  return decode_image(bytes, ImageFormat::kTnsr);
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto ext = path.extension().string();
  if (ext == ".pgm") return decode_image(bytes, ImageFormat::kPgm);
  if (ext == ".ppm") return decode_image(bytes, ImageFormat::kPpm);
  if (ext == ".tnsr") return decode_image(bytes, ImageFormat::kTnsr);
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  const std::string header = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.width()) + " " + std::to_string(image.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : image.interleaved()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

}  // namespace saleval
