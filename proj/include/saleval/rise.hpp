#pragma once

#include "saleval/scorer.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace saleval {

/// Randomized-mask saliency. Defaults: 4000 masks on a 7x7 grid, keep
/// probability 0.5.
struct RiseConfig {
  std::size_t masks = 4000;
  Index grid = 7;
  double keep_probability = 0.5;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;

  void validate() const;
};

/// Mask n of the set: a grid x grid Bernoulli(keep) pattern, bilinearly
/// stretched over (grid + 1) cells and cropped at a random sub-cell offset.
/// Each mask draws from its own generator seeded by (seed, n), so any subset
/// can be produced independently.
Grid<double> rise_mask(const RiseConfig& cfg, Index height, Index width, std::size_t n);

std::vector<Grid<double>> generate_rise_masks(const RiseConfig& cfg, Index height, Index width);

/// saliency = 1 / (N p) * sum_n c(I * M_n) M_n, with c the probability of
/// `category` (default: argmax on the unmasked image). Output is H x W.
SaliencyMap rise_saliency(const Image& image, Scorer& scorer, std::optional<Index> category,
                          const RiseConfig& cfg);

/// Block-averages a full-resolution map down by an integer factor.
SaliencyMap block_average(const SaliencyMap& map, Index factor);

}  // namespace saleval
