#include "helpers.hpp"
#include "saleval/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

using namespace saleval;

namespace {

// Pre-softmax linear scorer whose single category weights are `w`.
LinearScorer raw_linear(const Grid<double>& w) {
  Eigen::MatrixXd row = Eigen::Map<const Grid<double>>(w.data(), 1, w.size());
  return LinearScorer(row, Eigen::VectorXd::Zero(1), w.rows(), w.cols(), 1, true);
}

// Descending order of saliency indices, ties in row-major order.
std::vector<Index> block_order(const SaliencyMap& s) {
  std::vector<Index> idx(static_cast<std::size_t>(s.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return s.data()[a] > s.data()[b]; });
  return idx;
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k] / n;
    my += y[k] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Image with_block(Image img, const Image& from, Index index, Index cols, Index r) {
  const Index bi = index / cols, bj = index % cols;
  for (Index c = 0; c < img.channels(); ++c)
    img.plane(c).block(bi * r, bj * r, r, r) = from.plane(c).block(bi * r, bj * r, r, r);
  return img;
}

// Insertion gains by re-simulating every partially revealed image from scratch.
std::vector<double> replayed_gains(const Image& image, const SaliencyMap& s, Scorer& scorer,
                                   Index r, const BlurConfig& blur) {
  const Index category = predicted_category(scorer.score(image));
  const Image base = gaussian_blur(image, blur);
  const auto order = block_order(s);
  std::vector<double> c;
  for (std::size_t k = 0; k <= order.size(); ++k) {
    Image state = base;
    for (std::size_t j = 0; j < k; ++j) state = with_block(state, image, order[j], s.cols(), r);
    c.push_back(scorer.score(state)[category]);
  }
  std::vector<double> gains;
  for (std::size_t k = 1; k < c.size(); ++k) gains.push_back(c[k] - c[k - 1]);
  return gains;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("names and orientations") {
    for (Metric m : kAllMetrics) CHECK(parse_metric(metric_name(m)) == m);
    CHECK(parse_metric("dauc") == Metric::kDauc);
    CHECK_FALSE(parse_metric("AUC"));
    CHECK(orientation(Metric::kDauc) == Orientation::kLowerBetter);
    CHECK(orientation(Metric::kAd) == Orientation::kLowerBetter);
    for (Metric m : {Metric::kIauc, Metric::kDc, Metric::kIc, Metric::kIic, Metric::kAdd})
      CHECK(orientation(m) == Orientation::kHigherBetter);
  }

  TEST_CASE("curve auc") {
    ScoreCurve curve{{0, 0.25, 0.5, 0.75, 1}, {1, 0.6, 0.3, 0.1, 0}};
    CHECK(curve_auc(curve) == 0.375);
    CHECK(curve_auc(ScoreCurve{{0, 0.5, 1}, {0.4, 0.4, 0.4}}) == 1.0);
    CHECK(curve_auc(ScoreCurve{{0, 0.25, 0.5, 0.75, 1}, {1, 0.75, 0.5, 0.25, 0}}) == 0.5);
    CHECK(curve_auc(ScoreCurve{{0, 1}, {0.5, 0.25}}, false) == 0.375);
    CHECK_THROWS_AS(curve_auc(ScoreCurve{{0, 1}, {0.0, 0.0}}), DegenerateError);
    CHECK_THROWS_AS(trapezoid_auc(std::vector<double>{0}, std::vector<double>{1}),
                    std::invalid_argument);
  }

  TEST_CASE("pearson") {
    const std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> y = {3, 5, 7, 9};
    CHECK(pearson_correlation(x, y) == doctest::Approx(1.0));
    y = {-1, -2, -3, -4};
    CHECK(pearson_correlation(x, y) == doctest::Approx(-1.0));
    CHECK(pearson_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) ==
          doctest::Approx(0.5));
    CHECK_THROWS_AS(pearson_correlation(x, std::vector<double>{2, 2, 2, 2}), DegenerateError);
    CHECK_THROWS_AS(pearson_correlation(std::vector<double>{1}, std::vector<double>{1}),
                    DegenerateError);
    CHECK_THROWS_AS(pearson_correlation(x, std::vector<double>{1, 2}), std::invalid_argument);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> a(30), b(30);
      for (auto& v : a) v = g(rng);
      for (auto& v : b) v = g(rng);
      CHECK(pearson_correlation(a, b) == doctest::Approx(naive_pearson(a, b)).epsilon(1e-12));
    }
  }

  TEST_CASE("drop formulas") {
    CHECK(relative_drop(0.8, 0.6) == doctest::Approx(0.25));
    CHECK(relative_drop(0.8, 0.2) == doctest::Approx(0.75));
    CHECK(relative_drop(0.5, 0.9) == 0.0);
    CHECK(relative_drop(0.5, 0.5) == 0.0);
  }

  TEST_CASE("constant scorer") {
    ConstantScorer s(Eigen::Vector3d(0.2, 0.5, 0.3));
    std::mt19937_64 rng(1);
    const Image img = testing::random_image(8, 8, 3, rng);
    const SaliencyMap map = testing::random_map(4, 4, rng);
    const MetricRow row = evaluate_all(img, map, s, MetricConfig{});
    CHECK(row.tracked.category == 1);
    CHECK(row[Metric::kDauc].value == 1.0);
    CHECK(row[Metric::kIauc].value == 1.0);
    CHECK(row[Metric::kAd].value == 0.0);
    CHECK(row[Metric::kAdd].value == 0.0);
    CHECK(row[Metric::kIic].value == 0.0);
    CHECK(row[Metric::kDc].degenerate);
    CHECK(row[Metric::kIc].degenerate);
    CHECK(std::isnan(row[Metric::kDc].value));
    CHECK_THROWS_AS(deletion_correlation(img, map, s, 2), DegenerateError);
    CHECK_THROWS_AS(insertion_correlation(img, map, s, 2, BlurConfig{1.0}), DegenerateError);
    for (double v : deletion_curve(img, map, s, 2).normalized()) CHECK(v == 1.0);
  }

  TEST_CASE("constant saliency") {
    std::mt19937_64 rng(2);
    const Image img = testing::random_image(6, 6, 1, rng);
    const SaliencyMap flat = SaliencyMap::Constant(3, 3, 0.4);
    LinearScorer s = make_logistic2(testing::random_image(6, 6, 1, rng, -1, 1), 0.0);
    CHECK(iic(img, flat, s) == 0);
    CHECK(average_drop(img, flat, s) == 0.0);
    CHECK_THROWS_AS(deletion_correlation(img, flat, s, 2), DegenerateError);

    // The inverse mask is black; logistic2 without bias scores it at 0.5.
    const TrackedScore t = track(s, img);
    CHECK(average_drop_deletion(img, flat, s) == doctest::Approx(std::max(0.0, t.score - 0.5) / t.score));
  }

  TEST_CASE("iic rises when the mask removes evidence against the class") {
    Grid<double> w(1, 2);
    w << 0.0, 1.0;
    LinearScorer s = make_logistic2(w, -1.0);  // z = I_1 - 1 < 0, so category 0 is predicted
    const Image img = Image::constant(1, 2, 1, 0.5);
    SaliencyMap map(1, 2);
    map << 1.0, 0.0;
    CHECK(track(s, img).category == 0);
    CHECK(iic(img, map, s) == 1);
    CHECK(average_drop(img, map, s) == 0.0);
  }

  TEST_CASE("single block curve") {
    std::mt19937_64 rng(3);
    const Image img = testing::random_image(4, 4, 1, rng);
    LinearScorer s = raw_linear(Grid<double>::Constant(4, 4, 1.0));
    const ScoreCurve c = deletion_curve(img, SaliencyMap::Constant(1, 1, 1.0), s, 4);
    REQUIRE(c.scores.size() == 2);
    CHECK(c.fractions == std::vector<double>{0.0, 1.0});
    CHECK(c.scores[0] == doctest::Approx(img.plane(0).sum()));
    CHECK(c.scores[1] == 0.0);
    CHECK_THROWS_AS(deletion_curve(img, SaliencyMap::Constant(1, 1, 1.0), s, 2), DimensionError);
  }

  TEST_CASE("linear oracle: drops equal block saliency sums") {
    std::mt19937_64 rng(5);
    for (Index r : {1, 2, 4}) {
      const SaliencyMap map = testing::random_map(4, 4, rng);
      const Grid<double> w = upsample_block(map, r);
      LinearScorer s = raw_linear(w);
      const double u = 0.7;
      const Image img = Image::constant(4 * r, 4 * r, 1, u);
      const ScoreCurve c = deletion_curve(img, map, s, r);
      const auto order = block_order(map);
      for (std::size_t k = 1; k < c.scores.size(); ++k) {
        CHECK(c.scores[k - 1] - c.scores[k] ==
              doctest::Approx(u * r * r * map.data()[order[k - 1]]).epsilon(1e-12));
        CHECK(c.scores[k] <= c.scores[k - 1]);
      }
      CHECK(deletion_correlation(img, map, s, r) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("insertion oracle with designed weights") {
    // Weights chosen so that revealing block k adds exactly s_k.
    std::mt19937_64 rng(6);
    const Index r = 2;
    const SaliencyMap map = testing::random_map(4, 4, rng);
    Image img(8, 8, 1);
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 8; ++j) img(i, j, 0) = (i + j) % 2 ? 0.9 : 0.1;
    const BlurConfig blur{3.0};
    const Image base = gaussian_blur(img, blur);
    Grid<double> w = upsample_block(map, r);
    w.array() /= (img.plane(0) - base.plane(0)).array() * static_cast<double>(r * r);
    LinearScorer s = raw_linear(w);
    const ScoreCurve c = insertion_curve(img, map, s, r, blur);
    const auto order = block_order(map);
    for (std::size_t k = 1; k < c.scores.size(); ++k)
      CHECK(c.scores[k] - c.scores[k - 1] == doctest::Approx(map.data()[order[k - 1]]).epsilon(1e-9));
    CHECK(insertion_correlation(img, map, s, r, blur) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("insertion with heavy blur and saliency weights") {
    std::mt19937_64 rng(7);
    const Index r = 4;
    const SaliencyMap map = testing::random_map(4, 4, rng);
    Image img(16, 16, 1);
    Grid<double> w = upsample_block(map, r);
    for (Index i = 0; i < 16; ++i)
      for (Index j = 0; j < 16; ++j) {
        const bool bright = (i + j) % 2 == 0;
        img(i, j, 0) = bright ? 1.0 : 0.0;
        if (!bright) w(i, j) = 0.0;
      }
    LinearScorer s = raw_linear(w);
    CHECK(insertion_correlation(img, map, s, r, BlurConfig{40.0}) > 0.99);
  }

  TEST_CASE("insertion correlation matches brute-force replay") {
    std::mt19937_64 rng(8);
    const Index r = 2;
    const Image img = testing::random_image(8, 8, 3, rng);
    LinearScorer s = make_logistic2(testing::random_image(8, 8, 3, rng, -0.5, 0.5), 0.1);
    const BlurConfig blur{1.2};
    SaliencyMap map = testing::random_map(4, 4, rng);
    for (int flip = 0; flip < 2; ++flip) {
      const auto gains = replayed_gains(img, map, s, r, blur);
      std::vector<double> sal;
      for (Index idx : block_order(map)) sal.push_back(map.data()[idx]);
      CHECK(insertion_correlation(img, map, s, r, blur) ==
            doctest::Approx(naive_pearson(sal, gains)).epsilon(1e-10));
      map = (-map).eval();
    }
  }

  TEST_CASE("insertion limits") {
    std::mt19937_64 rng(9);
    const Image img = testing::random_image(8, 8, 1, rng);
    LinearScorer s = make_logistic2(testing::random_image(8, 8, 1, rng, -1, 1), 0.0);
    const SaliencyMap map = testing::random_map(4, 4, rng);
    const ScoreCurve identity = insertion_curve(img, map, s, 2, BlurConfig{1e-3});
    for (double v : identity.normalized()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    const ScoreCurve full = insertion_curve(img, map, s, 2, BlurConfig{2.0});
    CHECK(full.scores.back() == track(s, img).score);
  }

  TEST_CASE("batching does not change curves") {
    std::mt19937_64 rng(10);
    const Image img = testing::random_image(12, 12, 3, rng);
    LinearScorer s = make_logistic2(testing::random_image(12, 12, 3, rng, -1, 1), 0.0);
    const SaliencyMap map = testing::random_map(6, 6, rng);
    const ScoreCurve a = deletion_curve(img, map, s, 2, 1);
    CHECK(deletion_curve(img, map, s, 2, 7).scores == a.scores);
    CHECK(deletion_curve(img, map, s, 2, 64).scores == a.scores);
    const ScoreCurve b = insertion_curve(img, map, s, 2, BlurConfig{1.0}, 1);
    CHECK(insertion_curve(img, map, s, 2, BlurConfig{1.0}, 5).scores == b.scores);
  }

  TEST_CASE("ranges on random inputs") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
      const Image img = testing::random_image(8, 8, 3, rng);
      const SaliencyMap map = testing::random_map(4, 4, rng);
      LinearScorer s = make_logistic2(testing::random_image(8, 8, 3, rng, -1, 1), 0.0);
      const MetricRow row = evaluate_all(img, map, s, MetricConfig{});
      for (Metric m : {Metric::kDauc, Metric::kIauc, Metric::kAd, Metric::kAdd}) {
        CHECK(row[m].value >= 0.0);
        CHECK(row[m].value <= 1.0);
      }
      // At 8 px the default blur is the identity, so IC is usually degenerate.
      for (Metric m : {Metric::kDc, Metric::kIc}) {
        if (row[m].degenerate) continue;
        CHECK(std::abs(row[m].value) <= 1.0);
      }
      CHECK((row[Metric::kIic].value == 0.0 || row[Metric::kIic].value == 1.0));
      if (row[Metric::kIic].value == 1.0) CHECK(row[Metric::kAd].value == 0.0);
    }
  }

  TEST_CASE("block permutation consistency") {
    // A mean-pixel scorer is blind to block positions, so moving blocks and
    // their saliency together must not change any metric.
    std::mt19937_64 rng(12);
    const Index r = 2, n = 4;
    const Image img = testing::random_image(n * r, n * r, 3, rng);
    const SaliencyMap map = testing::random_map(n, n, rng);
    LinearScorer s = make_logistic2(Image::constant(n * r, n * r, 3, 0.1), -1.0);

    std::vector<Index> perm(n * n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Image pimg = img;
    SaliencyMap pmap = map;
    for (Index k = 0; k < n * n; ++k) {
      const Index src = perm[k];
      pmap(k / n, k % n) = map(src / n, src % n);
      for (Index c = 0; c < 3; ++c)
        pimg.plane(c).block((k / n) * r, (k % n) * r, r, r) =
            img.plane(c).block((src / n) * r, (src % n) * r, r, r);
    }
    MetricConfig cfg;
    cfg.blur_sigma = 1e-3;  // blur mixes neighbouring blocks; keep it inert
    const MetricRow a = evaluate_all(img, map, s, cfg);
    const MetricRow b = evaluate_all(pimg, pmap, s, cfg);
    for (Metric m : kAllMetrics) {
      INFO(metric_name(m));
      CHECK(a[m].degenerate == b[m].degenerate);
      if (!a[m].degenerate) CHECK(b[m].value == doctest::Approx(a[m].value).epsilon(1e-12));
    }
  }

  TEST_CASE("evaluate_all is deterministic") {
    std::mt19937_64 rng(13);
    const Image img = testing::random_image(8, 8, 1, rng);
    const SaliencyMap map = testing::random_map(4, 4, rng);
    LinearScorer s = make_logistic2(testing::random_image(8, 8, 1, rng, -1, 1), 0.0);
    MetricConfig cfg;
    const MetricRow a = evaluate_all(img, map, s, cfg);
    const MetricRow b = evaluate_all(img, map, s, cfg);
    for (Metric m : kAllMetrics)
      CHECK(std::memcmp(&a[m].value, &b[m].value, sizeof(double)) == 0);
    CHECK(cfg.hash() == MetricConfig{}.hash());
    cfg.normalize_insertion = false;
    CHECK(cfg.hash() != MetricConfig{}.hash());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  }
}
