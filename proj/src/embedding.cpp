#include "saleval/embedding.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace saleval {
namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr double kEntropyTolerance = 1e-8;

void check_distances(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols() || d.rows() < 2) {
    throw std::invalid_argument("distance matrix must be square with at least two points");
  }
  if (!d.allFinite() || d.minCoeff() < 0.0) {
    throw std::invalid_argument("distances must be finite and non-negative");
  }
}

}  // namespace

Eigen::MatrixXd conditional_probabilities(const Eigen::MatrixXd& distances, double perplexity) {
  check_distances(distances);
  const Eigen::Index n = distances.rows();
  if (!(perplexity >= 1.0) || perplexity > static_cast<double>(n - 1)) {
    throw std::invalid_argument("perplexity " + std::to_string(perplexity) +
                                " is infeasible for " + std::to_string(n) + " points");
  }
  const double target = std::log(perplexity);  // nats
  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, distances(i, j));

    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double z = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double shifted = distances(i, j) - dmin;
        row[j] = j == i ? 0.0 : std::exp(-beta * shifted);
        z += row[j];
        weighted += row[j] * shifted;
      }
      const double entropy = std::log(z) + beta * weighted / z;
      row /= z;
      const double gap = entropy - target;
      if (std::abs(gap) < kEntropyTolerance) break;
      if (gap > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    cond.row(i) = row;
  }
  return cond;
}

Eigen::VectorXd row_entropies_bits(const Eigen::MatrixXd& conditional) {
  Eigen::VectorXd h(conditional.rows());
  for (Eigen::Index i = 0; i < conditional.rows(); ++i) {
    double e = 0.0;
    for (Eigen::Index j = 0; j < conditional.cols(); ++j) {
      const double p = conditional(i, j);
      if (p > 0.0) e -= p * std::log2(p);
    }
    h[i] = e;
  }
  return h;
}

Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& distances, double perplexity) {
  const Eigen::MatrixXd cond = conditional_probabilities(distances, perplexity);
  const auto n = static_cast<double>(cond.rows());
  Eigen::MatrixXd joint = (cond + cond.transpose()) / (2.0 * n);
  joint = joint.cwiseMax(kProbabilityFloor);
  joint.diagonal().setZero();
  return joint / joint.sum();
}

KlGradient kl_gradient(const Eigen::MatrixXd& joint, const Eigen::MatrixX2d& points) {
  const Eigen::Index n = points.rows();
  if (joint.rows() != n || joint.cols() != n) {
    throw std::invalid_argument("joint probabilities and points disagree in size");
  }
  // Student-t affinities (1 + |y_i - y_j|^2)^-1, zero diagonal.
  const Eigen::VectorXd sq = points.rowwise().squaredNorm();
  Eigen::MatrixXd kernel =
      ((-2.0 * points * points.transpose()).colwise() + sq).rowwise() + sq.transpose();
  kernel = (1.0 + kernel.array().max(0.0)).inverse().matrix();
  kernel.diagonal().setZero();
  const double z = kernel.sum();
  const Eigen::MatrixXd q = kernel / z;

  KlGradient out;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = joint(i, j);
      if (i != j && p > 0.0) out.kl += p * std::log(p / q(i, j));
    }
  }
  // grad_i = 4 sum_j w_ij (y_i - y_j) = 4 (rowsum(w)_i y_i - (w y)_i)
  const Eigen::MatrixXd w = ((joint - q).array() * kernel.array()).matrix();
  out.gradient = 4.0 * (w.rowwise().sum().asDiagonal() * points - w * points);
  return out;
}

Embedding2D tsne_fit(const Eigen::MatrixXd& distances, const TsneConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("t-SNE needs at least one iteration");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  const Eigen::MatrixXd joint = joint_probabilities(distances, cfg.perplexity);
  const Eigen::Index n = joint.rows();

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_sigma);
  Embedding2D e;
  e.points.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < 2; ++d) e.points(i, d) = normal(rng);

  Eigen::MatrixX2d velocity = Eigen::MatrixX2d::Zero(n, 2);
  e.kl_trace.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool exaggerate = iter < cfg.exaggeration_iterations;
    const double momentum = iter < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    const KlGradient g =
        kl_gradient(exaggerate ? Eigen::MatrixXd(cfg.exaggeration * joint) : joint, e.points);
    velocity = momentum * velocity - cfg.learning_rate * g.gradient;
    e.points += velocity;
    e.points.rowwise() -= e.points.colwise().mean();
    if (!e.points.allFinite()) {
      throw std::runtime_error("t-SNE diverged at iteration " + std::to_string(iter) +
                               "; try a smaller learning rate");
    }
    e.kl_trace.push_back(kl_gradient(joint, e.points).kl);
  }
  e.kl = e.kl_trace.back();
  return e;
}

}  // namespace saleval
