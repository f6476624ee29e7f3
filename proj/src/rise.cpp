#include "saleval/rise.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace saleval {

void RiseConfig::validate() const {
  if (masks < 1) throw std::invalid_argument("RISE needs at least one mask");
  if (grid < 1) throw std::invalid_argument("RISE grid must be at least 1x1");
  if (!(keep_probability > 0.0 && keep_probability < 1.0)) {
    throw std::invalid_argument("RISE keep probability must lie in (0, 1)");
  }
}

namespace {

// Bilinear resize with half-pixel centres; coordinates outside the source
// clamp to the border (same as symmetric padding for linear interpolation).
double sample_bilinear(const Grid<double>& src, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(src.rows() - 1));
  x = std::clamp(x, 0.0, static_cast<double>(src.cols() - 1));
  const auto y0 = static_cast<Index>(std::floor(y));
  const auto x0 = static_cast<Index>(std::floor(x));
  const Index y1 = std::min(y0 + 1, src.rows() - 1);
  const Index x1 = std::min(x0 + 1, src.cols() - 1);
  const double ty = y - static_cast<double>(y0), tx = x - static_cast<double>(x0);
  return (1 - ty) * ((1 - tx) * src(y0, x0) + tx * src(y0, x1)) +
         ty * ((1 - tx) * src(y1, x0) + tx * src(y1, x1));
}

}  // namespace

Grid<double> rise_mask(const RiseConfig& cfg, Index height, Index width, std::size_t n) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Grid<double> cells(cfg.grid, cfg.grid);
  for (Index i = 0; i < cfg.grid; ++i)
    for (Index j = 0; j < cfg.grid; ++j) cells(i, j) = unit(rng) < cfg.keep_probability ? 1.0 : 0.0;

  const Index cell_h = (height + cfg.grid - 1) / cfg.grid;
  const Index cell_w = (width + cfg.grid - 1) / cfg.grid;
  const Index shift_y = std::uniform_int_distribution<Index>(0, cell_h - 1)(rng);
  const Index shift_x = std::uniform_int_distribution<Index>(0, cell_w - 1)(rng);

  // The g x g grid is stretched over (g + 1) cells, then an H x W window is
  // cropped at the shift.
  const double up_h = static_cast<double>((cfg.grid + 1) * cell_h);
  const double up_w = static_cast<double>((cfg.grid + 1) * cell_w);
  const double scale_y = static_cast<double>(cfg.grid) / up_h;
  const double scale_x = static_cast<double>(cfg.grid) / up_w;
  Grid<double> mask(height, width);
  for (Index i = 0; i < height; ++i) {
    const double y = (static_cast<double>(i + shift_y) + 0.5) * scale_y - 0.5;
    for (Index j = 0; j < width; ++j) {
      const double x = (static_cast<double>(j + shift_x) + 0.5) * scale_x - 0.5;
      mask(i, j) = sample_bilinear(cells, y, x);
    }
  }
  return mask;
}

std::vector<Grid<double>> generate_rise_masks(const RiseConfig& cfg, Index height, Index width) {
  std::vector<Grid<double>> masks;
  masks.reserve(cfg.masks);
  for (std::size_t n = 0; n < cfg.masks; ++n) masks.push_back(rise_mask(cfg, height, width, n));
  return masks;
}

SaliencyMap rise_saliency(const Image& image, Scorer& scorer, std::optional<Index> category,
                          const RiseConfig& cfg) {
  cfg.validate();
  const Index target = category ? *category : predicted_category(scorer.score(image));
  if (target < 0 || target >= scorer.categories()) {
    throw std::out_of_range("RISE category outside the scorer's range");
  }
  SaliencyMap acc = SaliencyMap::Zero(image.height(), image.width());
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<Grid<double>> masks;
  std::vector<Image> masked;
  for (std::size_t start = 0; start < cfg.masks; start += batch) {
    const std::size_t end = std::min(cfg.masks, start + batch);
    masks.clear();
    masked.clear();
    for (std::size_t n = start; n < end; ++n) {
      masks.push_back(rise_mask(cfg, image.height(), image.width(), n));
      masked.push_back(image.weighted(masks.back()));
    }
    const auto scores = scorer.score_batch(masked);
    for (std::size_t k = 0; k < masks.size(); ++k) acc += scores[k][target] * masks[k];
  }
  return acc / (static_cast<double>(cfg.masks) * cfg.keep_probability);
}

SaliencyMap block_average(const SaliencyMap& map, Index factor) {
  if (factor < 1 || map.rows() % factor != 0 || map.cols() % factor != 0) {
    throw DimensionError("map is not divisible by the averaging factor");
  }
  SaliencyMap out(map.rows() / factor, map.cols() / factor);
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j)
      out(i, j) = map.block(i * factor, j * factor, factor, factor).mean();
  return out;
}

}  // namespace saleval
