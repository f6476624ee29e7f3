#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saleval {

using Index = Eigen::Index;

/// Row-major dense 2-D grid. Row-major matches the on-disk pixel order.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using SaliencyMap = Grid<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// H x W x C image stored as one plane per channel, values in [0,1].
template <typename Scalar>
class BasicImage {
 public:
  using Plane = Grid<Scalar>;

  BasicImage() = default;

  BasicImage(Index height, Index width, Index channels)
      : planes_(static_cast<std::size_t>(channels), Plane::Zero(height, width)) {
    if (height < 1 || width < 1 || (channels != 1 && channels != 3)) {
      throw DimensionError("image must be at least 1x1 with 1 or 3 channels");
    }
  }

  static BasicImage constant(Index height, Index width, Index channels, Scalar value) {
    BasicImage img(height, width, channels);
    for (auto& p : img.planes_) p.setConstant(value);
    return img;
  }

  static BasicImage from_planes(std::vector<Plane> planes) {
    if (planes.empty()) throw DimensionError("image needs at least one channel");
    BasicImage img(planes.front().rows(), planes.front().cols(),
                   static_cast<Index>(planes.size()));
    for (std::size_t c = 0; c < planes.size(); ++c) {
      if (planes[c].rows() != img.height() || planes[c].cols() != img.width()) {
        throw DimensionError("channel planes differ in shape");
      }
      img.planes_[c] = std::move(planes[c]);
    }
    return img;
  }

  /// Builds an image from row-major, channel-last samples.
  static BasicImage from_interleaved(Index height, Index width, Index channels,
                                     std::span<const Scalar> data) {
    BasicImage img(height, width, channels);
    if (static_cast<Index>(data.size()) != height * width * channels) {
      throw DimensionError("interleaved buffer length does not match shape");
    }
    std::size_t k = 0;
    for (Index i = 0; i < height; ++i)
      for (Index j = 0; j < width; ++j)
        for (Index c = 0; c < channels; ++c) img.planes_[c](i, j) = data[k++];
    return img;
  }

  Index height() const { return planes_.empty() ? 0 : planes_.front().rows(); }
  Index width() const { return planes_.empty() ? 0 : planes_.front().cols(); }
  Index channels() const { return static_cast<Index>(planes_.size()); }
  Index size() const { return height() * width() * channels(); }

  const Plane& plane(Index c) const { return planes_[static_cast<std::size_t>(c)]; }
  Plane& plane(Index c) { return planes_[static_cast<std::size_t>(c)]; }

  Scalar operator()(Index i, Index j, Index c) const { return plane(c)(i, j); }
  Scalar& operator()(Index i, Index j, Index c) { return plane(c)(i, j); }

  std::vector<Scalar> interleaved() const {
    std::vector<Scalar> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (Index i = 0; i < height(); ++i)
      for (Index j = 0; j < width(); ++j)
        for (Index c = 0; c < channels(); ++c) out.push_back(plane(c)(i, j));
    return out;
  }

  bool same_shape(const BasicImage& other) const {
    return height() == other.height() && width() == other.width() &&
           channels() == other.channels();
  }

  /// Multiplies every channel by a per-pixel weight grid.
  template <typename Derived>
  BasicImage weighted(const Eigen::MatrixBase<Derived>& weight) const {
    if (weight.rows() != height() || weight.cols() != width()) {
      throw DimensionError("weight grid does not match image");
    }
    BasicImage out = *this;
    for (auto& p : out.planes_) p = p.cwiseProduct(weight);
    return out;
  }

  Scalar min_value() const {
    Scalar m = planes_.front().minCoeff();
    for (const auto& p : planes_) m = std::min(m, p.minCoeff());
    return m;
  }
  Scalar max_value() const {
    Scalar m = planes_.front().maxCoeff();
    for (const auto& p : planes_) m = std::max(m, p.maxCoeff());
    return m;
  }
  Scalar mean_value() const {
    Scalar s = 0;
    for (const auto& p : planes_) s += p.sum();
    return s / static_cast<Scalar>(size());
  }

  bool operator==(const BasicImage& other) const {
    if (!same_shape(other)) return false;
    for (std::size_t c = 0; c < planes_.size(); ++c)
      if (planes_[c] != other.planes_[c]) return false;
    return true;
  }

 private:
  std::vector<Plane> planes_;
};

using Image = BasicImage<double>;

/// Throws unless every sample is finite and inside [0,1].
void validate_unit_range(const Image& image);

/// Throws unless every entry is finite.
void validate_finite(const SaliencyMap& map);

/// Min-max normalization into [0,1]. A constant input maps to all ones, so
/// masking with it leaves the image untouched.
template <typename Derived>
Grid<typename Derived::Scalar> minmax_normalize(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  const Scalar lo = s.minCoeff();
  const Scalar hi = s.maxCoeff();
  if (!(hi > lo)) {
    return Grid<Scalar>::Ones(s.rows(), s.cols());
  }
  return ((s.array() - lo) / (hi - lo)).matrix();
}

enum class UpsampleMode { kNearest, kBilinear };

/// Nearest-neighbour block replication: out(i,j) = s(i/r, j/r).
template <typename Derived>
Grid<typename Derived::Scalar> upsample_block(const Eigen::MatrixBase<Derived>& s, Index r) {
  if (r < 1) throw DimensionError("upsampling factor must be positive");
  Grid<typename Derived::Scalar> out(s.rows() * r, s.cols() * r);
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j) out(i, j) = s(i / r, j / r);
  return out;
}

/// Bilinear upsampling with half-pixel centres and edge clamping. Produces
/// the same output size as upsample_block.
template <typename Derived>
Grid<typename Derived::Scalar> upsample_bilinear(const Eigen::MatrixBase<Derived>& s, Index r) {
  using Scalar = typename Derived::Scalar;
  if (r < 1) throw DimensionError("upsampling factor must be positive");
  const Index rows = s.rows(), cols = s.cols();
  Grid<Scalar> out(rows * r, cols * r);
  auto coord = [r](Index i, Index n, Index& i0, Index& i1, Scalar& t) {
    Scalar x = (static_cast<Scalar>(i) + Scalar(0.5)) / static_cast<Scalar>(r) - Scalar(0.5);
    x = std::clamp(x, Scalar(0), static_cast<Scalar>(n - 1));
    i0 = static_cast<Index>(std::floor(x));
    i1 = std::min(i0 + 1, n - 1);
    t = x - static_cast<Scalar>(i0);
  };
  for (Index i = 0; i < out.rows(); ++i) {
    Index i0, i1;
    Scalar ti;
    coord(i, rows, i0, i1, ti);
    for (Index j = 0; j < out.cols(); ++j) {
      Index j0, j1;
      Scalar tj;
      coord(j, cols, j0, j1, tj);
      out(i, j) = (1 - ti) * ((1 - tj) * s(i0, j0) + tj * s(i0, j1)) +
                  ti * ((1 - tj) * s(i1, j0) + tj * s(i1, j1));
    }
  }
  return out;
}

template <typename Derived>
Grid<typename Derived::Scalar> upsample(const Eigen::MatrixBase<Derived>& s, Index r,
                                        UpsampleMode mode) {
  return mode == UpsampleMode::kNearest ? upsample_block(s, r) : upsample_bilinear(s, r);
}

/// Integer block factor between an image and a saliency map. Throws unless the
/// image dimensions are the same integer multiple of the map dimensions.
Index block_factor(Index image_h, Index image_w, Index map_h, Index map_w);

}  // namespace saleval
