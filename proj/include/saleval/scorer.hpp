#pragma once

#include "saleval/tensors.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saleval {

/// Per-category scores. Probabilities unless the scorer runs in pre-softmax
/// (raw) mode.
using ScoreVector = Eigen::VectorXd;

enum class ScorerErrc {
  kProtocol,
  kTimeout,
  kMalformedResponse,
  kDimensionMismatch,
  kRemoteError,  // the model answered with an error object
  kConfig,
};

const char* to_string(ScorerErrc code);

class ScorerError : public std::runtime_error {
 public:
  ScorerError(ScorerErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ScorerErrc code() const { return code_; }

 private:
  ScorerErrc code_;
};

/// What a model emits before the engine sees it.
enum class OutputKind { kProbabilities, kLogits };

/// Black-box model m(.): image -> per-category scores.
///
/// Implementations need not be thread-safe; the engine gives every worker its
/// own instance through a ScorerFactory.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ScoreVector score(const Image& image) = 0;

  /// Scores several images. Must give the same result as calling score() on
  /// each image in turn.
  virtual std::vector<ScoreVector> score_batch(std::span<const Image> images);

  virtual Index categories() const = 0;

  /// True when scores are pre-softmax values (oracle mode only).
  virtual bool raw_scores() const { return false; }

  virtual std::string id() const = 0;
};

using ScorerFactory = std::function<std::unique_ptr<Scorer>()>;

/// Index of the largest score; ties resolve to the lowest index.
Index predicted_category(const ScoreVector& scores);

ScoreVector softmax(const ScoreVector& logits);

/// Throws kMalformedResponse unless scores are finite, in [0,1] and sum to
/// 1 within 1e-6.
void validate_probabilities(const ScoreVector& scores);

/// Returns the same vector for every image.
class ConstantScorer final : public Scorer {
 public:
  explicit ConstantScorer(ScoreVector probabilities);
  ScoreVector score(const Image& image) override;
  Index categories() const override { return probs_.size(); }
  std::string id() const override;

 private:
  ScoreVector probs_;
};

/// scores = softmax(W * flatten(I) + b), with flatten in row-major,
/// channel-last order. In pre-softmax mode the affine output is returned
/// unchanged, which keeps score differences exactly linear in the pixels.
class LinearScorer final : public Scorer {
 public:
  /// Pass height = width = channels = 0 to check only the flattened length.
  LinearScorer(Eigen::MatrixXd weights, Eigen::VectorXd bias, Index height, Index width,
               Index channels, bool pre_softmax = false);

  /// Convenience for per-category weight images of identical shape.
  static LinearScorer from_weight_images(const std::vector<Image>& weights,
                                         Eigen::VectorXd bias, bool pre_softmax = false);

  ScoreVector score(const Image& image) override;
  Index categories() const override { return weights_.rows(); }
  bool raw_scores() const override { return pre_softmax_; }
  std::string id() const override;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  Index height_, width_, channels_;
  bool pre_softmax_;
};

/// Two-category logistic model: z = sum(w * I) + bias, scores = (1 - sigmoid(z), sigmoid(z)).
/// Equivalent to softmax over logits (0, z).
LinearScorer make_logistic2(const Image& weights, double bias);
LinearScorer make_logistic2(const Grid<double>& weights, double bias);

/// How to reach a model. Textual forms:
///   builtin:constant=0.3,0.7
///   builtin:linear=<weights.tnsr>[,b0,b1,...]   (K x (H*W*C) weight matrix)
///   builtin:linear-raw=<weights.tnsr>    (pre-softmax oracle mode)
///   builtin:logistic2=<weights.tnsr>[,<bias>]   (H x W or H x W x C weights)
///   cmd:<argv...>                        (child process speaking the line protocol)
///   tcp:<host>:<port>
struct ScorerSpec {
  enum class Kind { kConstant, kLinear, kLinearRaw, kLogistic2, kSubprocess, kTcp };
  Kind kind = Kind::kConstant;
  std::string argument;
  std::size_t batch_size = 32;
  int timeout_ms = 30000;

  static ScorerSpec parse(const std::string& text);
  std::string to_string() const;
};

/// Builds one scorer instance. Builtins load their weights here; external
/// kinds connect and perform the handshake.
std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec);

ScorerFactory make_scorer_factory(const ScorerSpec& spec);

}  // namespace saleval
