#include "saleval/embedding.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace saleval;
using Eigen::Index;

namespace {

Eigen::MatrixXd random_distances(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = u(rng);
  return d;
}

Eigen::MatrixX2d random_points(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixX2d y(n, 2);
  for (Index i = 0; i < n; ++i) y.row(i) << g(rng), g(rng);
  return y;
}

Eigen::MatrixXd student_q(const Eigen::MatrixX2d& y) {
  const Index n = y.rows();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j) q(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
  return q / q.sum();
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("equidistant points") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd p = joint_probabilities(d, 2.0);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) CHECK(p(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 6.0));
  }

  TEST_CASE("bandwidth search hits the entropy target") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd d = random_distances(25, rng);
    for (double perp : {2.0, 5.0, 10.0}) {
      const Eigen::MatrixXd cond = conditional_probabilities(d, perp);
      const Eigen::VectorXd h = row_entropies_bits(cond);
      CHECK((h.array() - std::log2(perp)).abs().maxCoeff() < 1e-5);
      CHECK((cond.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(cond.diagonal().isZero());
    }
    CHECK_THROWS_AS(conditional_probabilities(d, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(conditional_probabilities(d, 25.0), std::invalid_argument);
  }

  TEST_CASE("joint probabilities") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd d = random_distances(12, rng);
    const Eigen::MatrixXd p = joint_probabilities(d, 4.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.diagonal().isZero());
    for (Index i = 0; i < 12; ++i)
      for (Index j = 0; j < 12; ++j)
        if (i != j) CHECK(p(i, j) >= 1e-12 / (1 + 1e-9));

    // Scaling D only rescales the bandwidths.
    const Eigen::MatrixXd scaled = joint_probabilities(3.5 * d, 4.0);
    CHECK((scaled - p).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("gradient vanishes when P equals Q") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixX2d y = random_points(8, rng);
    const KlGradient g = kl_gradient(student_q(y), y);
    CHECK(g.gradient.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs(g.kl) < 1e-12);
  }

  TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd p = joint_probabilities(random_distances(10, rng), 3.0);
    const Eigen::MatrixX2d y = random_points(10, rng);
    const KlGradient g = kl_gradient(p, y);
    CHECK(g.kl >= 0.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (Index i = 0; i < 10; ++i)
      for (Index c = 0; c < 2; ++c) {
        Eigen::MatrixX2d a = y, b = y;
        a(i, c) += h;
        b(i, c) -= h;
        const double fd = (kl_gradient(p, a).kl - kl_gradient(p, b).kl) / (2 * h);
        worst = std::max(worst, std::abs(fd - g.gradient(i, c)) / std::max(std::abs(fd), 1e-8));
      }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("kl is rotation invariant") {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd p = joint_probabilities(random_distances(9, rng), 3.0);
    const Eigen::MatrixX2d y = random_points(9, rng);
    Eigen::Matrix2d rot;
    rot << std::cos(0.7), -std::sin(0.7), std::sin(0.7), std::cos(0.7);
    const Eigen::MatrixX2d ry = y * rot.transpose();
    CHECK(kl_gradient(p, ry).kl == doctest::Approx(kl_gradient(p, y).kl).epsilon(1e-12));
  }

  TEST_CASE("two points") {
    Eigen::MatrixXd d(2, 2);
    d << 0, 1, 1, 0;
    TsneConfig cfg;
    cfg.perplexity = 1.0;
    cfg.iterations = 200;
    const Embedding2D e = tsne_fit(d, cfg);
    const double dist = (e.points.row(0) - e.points.row(1)).norm();
    CHECK(dist > 0.0);
    CHECK(std::isfinite(dist));
    // With two points P and Q are both (0.5, 0.5), so KL is zero throughout.
    for (double kl : e.kl_trace) CHECK(std::abs(kl) < 1e-12);
    CHECK(e.kl == e.kl_trace.back());
  }

  TEST_CASE("fit is deterministic") {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd d = random_distances(15, rng);
    TsneConfig cfg;
    cfg.perplexity = 4.0;
    cfg.iterations = 300;
    cfg.seed = 9;
    const Embedding2D a = tsne_fit(d, cfg);
    const Embedding2D b = tsne_fit(d, cfg);
    CHECK(a.points == b.points);
    CHECK(a.points.allFinite());
    cfg.seed = 10;
    CHECK(tsne_fit(d, cfg).points != a.points);
  }

  TEST_CASE("kl settles after exaggeration") {
    std::mt19937_64 rng(7);
    const Eigen::MatrixXd d = random_distances(20, rng);
    TsneConfig cfg;
    cfg.perplexity = 5.0;
    const Embedding2D e = tsne_fit(d, cfg);
    REQUIRE(e.kl_trace.size() == 1000);
    for (std::size_t k = 901; k < 1000; ++k) CHECK(e.kl_trace[k] <= e.kl_trace[k - 1] + 1e-8);
  }
}
