#pragma once

#include "saleval/tensors.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline saleval::Image random_image(saleval::Index h, saleval::Index w, saleval::Index c,
                                   std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  saleval::Image img(h, w, c);
  for (saleval::Index k = 0; k < c; ++k)
    for (saleval::Index i = 0; i < h; ++i)
      for (saleval::Index j = 0; j < w; ++j) img(i, j, k) = u(rng);
  return img;
}

inline saleval::SaliencyMap random_map(saleval::Index h, saleval::Index w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  saleval::SaliencyMap s(h, w);
  for (saleval::Index i = 0; i < h; ++i)
    for (saleval::Index j = 0; j < w; ++j) s(i, j) = u(rng);
  return s;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("saleval_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
