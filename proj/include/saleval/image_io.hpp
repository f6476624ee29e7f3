#pragma once

#include "saleval/tensor_io.hpp"

namespace saleval {

enum class ImageFormat { kPgm, kPpm, kTnsr };

/// Decodes binary PGM (P5), PPM (P6) or TNSR bytes. Integer samples are
/// divided by maxval, which must be 255 or 65535.
Image decode_image(std::span<const std::uint8_t> bytes, ImageFormat format);

/// Picks the format from the magic bytes.
Image decode_image(std::span<const std::uint8_t> bytes);

/// Loads by extension (.pgm, .ppm, .tnsr), falling back to sniffing.
Image load_image(const std::filesystem::path& path);

/// 8-bit P5/P6 writer, mostly for fixtures and demos.
std::vector<std::uint8_t> encode_pnm(const Image& image);

}  // namespace saleval
