#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace saleval {

/// Exact t-SNE over a precomputed distance matrix.
struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 100.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double exaggeration = 4.0;
  int exaggeration_iterations = 100;
  double init_sigma = 1e-2;
  std::uint64_t seed = 0;
};

struct Embedding2D {
  Eigen::MatrixX2d points;
  double kl = 0.0;
  std::vector<double> kl_trace;  // one value per iteration, against the true P
};

/// Row-stochastic p_{j|i} proportional to exp(-beta_i * D_ij), with beta_i found by
/// bisection so each row's entropy is log2(perplexity) bits. D is used as
/// given (it plays the role of a squared distance). Requires
/// 1 <= perplexity <= n - 1. If more than `perplexity` neighbours tie at the
/// smallest distance the target is out of reach and the row ends up uniform
/// over the tied set.
Eigen::MatrixXd conditional_probabilities(const Eigen::MatrixXd& distances, double perplexity);

/// Entropy in bits of each row of a row-stochastic matrix.
Eigen::VectorXd row_entropies_bits(const Eigen::MatrixXd& conditional);

/// Symmetrized joint probabilities (P + P^T) / 2n, floored at 1e-12 off the
/// diagonal and renormalized to sum 1.
Eigen::MatrixXd joint_probabilities(const Eigen::MatrixXd& distances, double perplexity);

struct KlGradient {
  double kl = 0.0;
  Eigen::MatrixX2d gradient;
};

/// KL(P || Q) with the Student-t kernel q_ij ~ (1 + |y_i - y_j|^2)^-1, and
/// its gradient 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
KlGradient kl_gradient(const Eigen::MatrixXd& joint, const Eigen::MatrixX2d& points);

/// Momentum gradient descent with early exaggeration. Throws
/// std::runtime_error if the coordinates stop being finite.
Embedding2D tsne_fit(const Eigen::MatrixXd& distances, const TsneConfig& cfg);

}  // namespace saleval
