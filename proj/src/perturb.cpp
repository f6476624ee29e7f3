#include "saleval/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace saleval {
namespace {

Grid<double> pixel_weights(const Image& image, const SaliencyMap& saliency, UpsampleMode mode) {
  validate_finite(saliency);
  const Index r = block_factor(image.height(), image.width(), saliency.rows(), saliency.cols());
  return minmax_normalize(upsample(saliency, r, mode));
}

}  // namespace

Image apply_saliency_mask(const Image& image, const SaliencyMap& saliency, UpsampleMode mode) {
  return image.weighted(pixel_weights(image, saliency, mode));
}

Image apply_inverse_saliency_mask(const Image& image, const SaliencyMap& saliency,
                                  UpsampleMode mode) {
  const Grid<double> w = pixel_weights(image, saliency, mode);
  return image.weighted((1.0 - w.array()).matrix());
}

MaskSequence::MaskSequence(const SaliencyMap& saliency, Index block)
    : rows_(saliency.rows()), cols_(saliency.cols()), block_(block) {
  if (block < 1) throw DimensionError("block factor must be positive");
  validate_finite(saliency);
  steps_.reserve(static_cast<std::size_t>(saliency.size()));
  for (Index i = 0; i < rows_; ++i)
    for (Index j = 0; j < cols_; ++j) steps_.push_back({i, j, saliency(i, j)});
  std::stable_sort(steps_.begin(), steps_.end(),
                   [](const MaskStep& a, const MaskStep& b) { return a.saliency > b.saliency; });
}

Grid<double> MaskSequence::cumulative_mask(Index k) const {
  Grid<double> mask = Grid<double>::Ones(image_rows(), image_cols());
  for (Index s = 1; s <= k; ++s) {
    const auto& st = step(s);
    mask.block(st.row * block_, st.col * block_, block_, block_).setZero();
  }
  return mask;
}

std::vector<double> MaskSequence::saliency_values() const {
  std::vector<double> out;
  out.reserve(steps_.size());
  for (const auto& s : steps_) out.push_back(s.saliency);
  return out;
}

MaskSequence deletion_mask_sequence(const SaliencyMap& saliency, Index block) {
  return MaskSequence(saliency, block);
}

void copy_block(Image& dst, const Image& src, const MaskStep& step, Index block) {
  for (Index c = 0; c < dst.channels(); ++c) {
    dst.plane(c).block(step.row * block, step.col * block, block, block) =
        src.plane(c).block(step.row * block, step.col * block, block, block);
  }
}

void zero_block(Image& image, const MaskStep& step, Index block) {
  for (Index c = 0; c < image.channels(); ++c) {
    image.plane(c).block(step.row * block, step.col * block, block, block).setZero();
  }
}

Index BlurConfig::radius() const { return static_cast<Index>(std::ceil(3.0 * sigma)); }

BlurConfig BlurConfig::scaled_for(Index height, Index width) {
  return BlurConfig{5.0 * static_cast<double>(std::max(height, width)) / 448.0};
}

std::vector<double> gaussian_kernel(const BlurConfig& cfg) {
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) {
    throw std::invalid_argument("blur sigma must be positive and finite");
  }
  const Index radius = cfg.radius();
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (Index t = -radius; t <= radius; ++t) {
    const double x = static_cast<double>(t) / cfg.sigma;
    taps[static_cast<std::size_t>(t + radius)] = std::exp(-0.5 * x * x);
  }
  const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& w : taps) w /= total;
  return taps;
}

namespace {

// One pass along rows (horizontal = true) or columns.
Grid<double> convolve_1d(const Grid<double>& in, const std::vector<double>& taps, bool horizontal) {
  const Index radius = static_cast<Index>(taps.size() / 2);
  Grid<double> out(in.rows(), in.cols());
  const Index n = horizontal ? in.cols() : in.rows();
  for (Index i = 0; i < in.rows(); ++i) {
    for (Index j = 0; j < in.cols(); ++j) {
      const Index pos = horizontal ? j : i;
      double acc = 0.0, norm = 0.0;
      for (Index t = std::max<Index>(-radius, -pos); t <= std::min(radius, n - 1 - pos); ++t) {
        const double w = taps[static_cast<std::size_t>(t + radius)];
        acc += w * (horizontal ? in(i, j + t) : in(i + t, j));
        norm += w;
      }
      out(i, j) = acc / norm;
    }
  }
  return out;
}

}  // namespace

Image gaussian_blur(const Image& image, const BlurConfig& cfg) {
  const auto taps = gaussian_kernel(cfg);
  Image out = image;
  for (Index c = 0; c < image.channels(); ++c) {
    Grid<double> p = convolve_1d(convolve_1d(image.plane(c), taps, true), taps, false);
    out.plane(c) = p.cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

}  // namespace saleval
