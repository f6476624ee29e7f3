#pragma once

#include "saleval/tensors.hpp"

#include <vector>

namespace saleval {

/// Highlighting: norm(upsamp(S)) * I. The map is upsampled by the integer
/// block factor between image and map.
Image apply_saliency_mask(const Image& image, const SaliencyMap& saliency,
                          UpsampleMode mode = UpsampleMode::kNearest);

/// Removal: (1 - norm(upsamp(S))) * I.
Image apply_inverse_saliency_mask(const Image& image, const SaliencyMap& saliency,
                                  UpsampleMode mode = UpsampleMode::kNearest);

struct MaskStep {
  Index row = 0;  // block coordinates in the saliency grid
  Index col = 0;
  double saliency = 0.0;
};

/// Blocks of a saliency map in perturbation order: descending saliency, ties
/// in row-major order. Cumulative masks are derived on demand rather than
/// stored, since K of them would be K x H x W.
class MaskSequence {
 public:
  MaskSequence(const SaliencyMap& saliency, Index block);

  Index steps() const { return static_cast<Index>(steps_.size()); }
  Index block() const { return block_; }
  Index map_rows() const { return rows_; }
  Index map_cols() const { return cols_; }
  Index image_rows() const { return rows_ * block_; }
  Index image_cols() const { return cols_ * block_; }

  /// Step k in 1..K.
  const MaskStep& step(Index k) const { return steps_[static_cast<std::size_t>(k - 1)]; }
  const std::vector<MaskStep>& steps_list() const { return steps_; }

  /// Binary H x W mask after k steps (0 = perturbed). k = 0 is all ones.
  Grid<double> cumulative_mask(Index k) const;

  /// Saliency values in step order, s_1..s_K.
  std::vector<double> saliency_values() const;

 private:
  std::vector<MaskStep> steps_;
  Index rows_ = 0;
  Index cols_ = 0;
  Index block_ = 1;
};

MaskSequence deletion_mask_sequence(const SaliencyMap& saliency, Index block);

/// Overwrites the image block (in map coordinates) of `dst` with `src`.
void copy_block(Image& dst, const Image& src, const MaskStep& step, Index block);

/// Zeroes one image block in place.
void zero_block(Image& image, const MaskStep& step, Index block);

struct BlurConfig {
  double sigma = 5.0;

  Index radius() const;

  /// sigma = 5 * max(H, W) / 448, i.e. 5 px at 448 px resolution.
  static BlurConfig scaled_for(Index height, Index width);
};

/// Normalized 1-D Gaussian taps for offsets -radius..radius.
std::vector<double> gaussian_kernel(const BlurConfig& cfg);

/// Separable Gaussian blur. Near the border the kernel is renormalized over
/// the in-bounds taps.
Image gaussian_blur(const Image& image, const BlurConfig& cfg);

}  // namespace saleval
