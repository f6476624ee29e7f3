#include "saleval/scorer.hpp"

#include "saleval/protocol.hpp"
#include "saleval/tensor_io.hpp"

#include <cmath>
#include <sstream>

namespace saleval {

const char* to_string(ScorerErrc code) {
  switch (code) {
    case ScorerErrc::kProtocol: return "protocol failure";
    case ScorerErrc::kTimeout: return "timeout";
    case ScorerErrc::kMalformedResponse: return "malformed response";
    case ScorerErrc::kDimensionMismatch: return "dimension mismatch";
    case ScorerErrc::kRemoteError: return "remote error";
    case ScorerErrc::kConfig: return "scorer configuration";
  }
  return "unknown";
}

std::vector<ScoreVector> Scorer::score_batch(std::span<const Image> images) {
  std::vector<ScoreVector> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(score(img));
  return out;
}

Index predicted_category(const ScoreVector& scores) {
  Index best = 0;
  for (Index k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

ScoreVector softmax(const ScoreVector& logits) {
  const double m = logits.maxCoeff();
  ScoreVector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

void validate_probabilities(const ScoreVector& scores) {
  if (scores.size() == 0 || !scores.allFinite() || scores.minCoeff() < 0.0 ||
      scores.maxCoeff() > 1.0 || std::abs(scores.sum() - 1.0) > 1e-6) {
    throw ScorerError(ScorerErrc::kMalformedResponse, "scores are not a probability vector");
  }
}

ConstantScorer::ConstantScorer(ScoreVector probabilities) : probs_(std::move(probabilities)) {
  validate_probabilities(probs_);
}

ScoreVector ConstantScorer::score(const Image&) { return probs_; }

std::string ConstantScorer::id() const {
  std::ostringstream os;
  os << "builtin:constant=";
  for (Index k = 0; k < probs_.size(); ++k) os << (k ? "," : "") << probs_[k];
  return os.str();
}

LinearScorer::LinearScorer(Eigen::MatrixXd weights, Eigen::VectorXd bias, Index height,
                           Index width, Index channels, bool pre_softmax)
    : weights_(std::move(weights)),
      bias_(std::move(bias)),
      height_(height),
      width_(width),
      channels_(channels),
      pre_softmax_(pre_softmax) {
  if (weights_.rows() < 1 || bias_.size() != weights_.rows()) {
    throw ScorerError(ScorerErrc::kConfig, "bias length must equal the number of categories");
  }
  if (!weights_.allFinite() || !bias_.allFinite()) {
    throw ScorerError(ScorerErrc::kConfig, "weights must be finite");
  }
  if (height_ * width_ * channels_ != 0 && height_ * width_ * channels_ != weights_.cols()) {
    throw ScorerError(ScorerErrc::kConfig, "weight columns do not match declared input shape");
  }
}

LinearScorer LinearScorer::from_weight_images(const std::vector<Image>& weights,
                                              Eigen::VectorXd bias, bool pre_softmax) {
  if (weights.empty()) throw ScorerError(ScorerErrc::kConfig, "no weight images");
  const Image& first = weights.front();
  Eigen::MatrixXd w(static_cast<Index>(weights.size()), first.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!weights[k].same_shape(first)) {
      throw ScorerError(ScorerErrc::kConfig, "weight images differ in shape");
    }
    const auto flat = weights[k].interleaved();
    w.row(static_cast<Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(flat.data(), first.size());
  }
  return LinearScorer(std::move(w), std::move(bias), first.height(), first.width(),
                      first.channels(), pre_softmax);
}

ScoreVector LinearScorer::score(const Image& image) {
  const bool shape_known = height_ * width_ * channels_ != 0;
  if ((shape_known && (image.height() != height_ || image.width() != width_ ||
                       image.channels() != channels_)) ||
      image.size() != weights_.cols()) {
    throw ScorerError(ScorerErrc::kDimensionMismatch,
                      "image has " + std::to_string(image.size()) + " samples, weights expect " +
                          std::to_string(weights_.cols()));
  }
  const auto flat = image.interleaved();
  const ScoreVector logits =
      weights_ * Eigen::Map<const Eigen::VectorXd>(flat.data(), image.size()) + bias_;
  return pre_softmax_ ? logits : softmax(logits);
}

std::string LinearScorer::id() const {
  std::ostringstream os;
  os << (pre_softmax_ ? "builtin:linear-raw" : "builtin:linear") << "[" << weights_.rows() << "x"
     << weights_.cols() << "]";
  return os.str();
}

LinearScorer make_logistic2(const Image& weights, double bias) {
  Image zero = Image::constant(weights.height(), weights.width(), weights.channels(), 0.0);
  Eigen::Vector2d b(0.0, bias);
  return LinearScorer::from_weight_images({zero, weights}, b);
}

LinearScorer make_logistic2(const Grid<double>& weights, double bias) {
  return make_logistic2(Image::from_planes({weights}), bias);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  return parts;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ScorerError(ScorerErrc::kConfig, "not a number: '" + s + "'");
  }
  return v;
}

std::unique_ptr<Scorer> load_linear(const std::string& argument, bool raw) {
  const auto parts = split(argument, ',');
  if (parts.empty()) throw ScorerError(ScorerErrc::kConfig, "linear scorer needs a weight file");
  const RawTensor t = decode_tnsr(read_file(parts[0]));
  if (t.dims.size() != 2) {
    throw ScorerError(ScorerErrc::kConfig, "linear weights must be K x (H*W*C)");
  }
  Eigen::MatrixXd w =
      Eigen::Map<const Grid<float>>(t.values.data(), t.dims[0], t.dims[1]).cast<double>();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(w.rows());
  if (parts.size() > 1) {
    if (parts.size() - 1 != static_cast<std::size_t>(w.rows())) {
      throw ScorerError(ScorerErrc::kConfig, "need one bias per category");
    }
    for (Index k = 0; k < w.rows(); ++k) b[k] = parse_double(parts[static_cast<std::size_t>(k) + 1]);
  }
  return std::make_unique<LinearScorer>(std::move(w), std::move(b), 0, 0, 0, raw);
}

std::unique_ptr<Scorer> load_logistic2(const std::string& argument) {
  const auto parts = split(argument, ',');
  if (parts.empty() || parts.size() > 2) {
    throw ScorerError(ScorerErrc::kConfig, "logistic2 expects <weights.tnsr>[,<bias>]");
  }
  const RawTensor t = decode_tnsr(read_file(parts[0]));
  const Index channels = t.dims.size() == 3 ? t.dims[2] : 1;
  std::vector<double> data(t.values.begin(), t.values.end());
  Image w = Image::from_interleaved(t.dims[0], t.dims[1], channels, data);
  const double bias = parts.size() == 2 ? parse_double(parts[1]) : 0.0;
  return std::make_unique<LinearScorer>(make_logistic2(w, bias));
}

}  // namespace

ScorerSpec ScorerSpec::parse(const std::string& text) {
  ScorerSpec spec;
  auto starts = [&](const std::string& prefix) { return text.rfind(prefix, 0) == 0; };
  auto rest = [&](const std::string& prefix) { return text.substr(prefix.size()); };
  if (starts("builtin:constant=")) {
    spec.kind = Kind::kConstant;
    spec.argument = rest("builtin:constant=");
  } else if (starts("builtin:linear=")) {
    spec.kind = Kind::kLinear;
    spec.argument = rest("builtin:linear=");
  } else if (starts("builtin:linear-raw=")) {
    spec.kind = Kind::kLinearRaw;
    spec.argument = rest("builtin:linear-raw=");
  } else if (starts("builtin:logistic2=")) {
    spec.kind = Kind::kLogistic2;
    spec.argument = rest("builtin:logistic2=");
  } else if (starts("cmd:")) {
    spec.kind = Kind::kSubprocess;
    spec.argument = rest("cmd:");
  } else if (starts("tcp:")) {
    spec.kind = Kind::kTcp;
    spec.argument = rest("tcp:");
  } else {
    throw ScorerError(ScorerErrc::kConfig, "unknown scorer spec '" + text + "'");
  }
  if (spec.argument.empty()) throw ScorerError(ScorerErrc::kConfig, "empty scorer argument");
  return spec;
}

std::string ScorerSpec::to_string() const {
  switch (kind) {
    case Kind::kConstant: return "builtin:constant=" + argument;
    case Kind::kLinear: return "builtin:linear=" + argument;
    case Kind::kLinearRaw: return "builtin:linear-raw=" + argument;
    case Kind::kLogistic2: return "builtin:logistic2=" + argument;
    case Kind::kSubprocess: return "cmd:" + argument;
    case Kind::kTcp: return "tcp:" + argument;
  }
  return {};
}

std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec) {
  const std::chrono::milliseconds timeout(spec.timeout_ms);
  switch (spec.kind) {
    case ScorerSpec::Kind::kConstant: {
      const auto parts = split(spec.argument, ',');
      ScoreVector v(static_cast<Index>(parts.size()));
      for (std::size_t k = 0; k < parts.size(); ++k) v[static_cast<Index>(k)] = parse_double(parts[k]);
      return std::make_unique<ConstantScorer>(v);
    }
    case ScorerSpec::Kind::kLinear: return load_linear(spec.argument, false);
    case ScorerSpec::Kind::kLinearRaw: return load_linear(spec.argument, true);
    case ScorerSpec::Kind::kLogistic2: return load_logistic2(spec.argument);
    case ScorerSpec::Kind::kSubprocess: {
      const auto argv = protocol::split_command(spec.argument);
      if (argv.empty()) throw ScorerError(ScorerErrc::kConfig, "empty command");
      return std::make_unique<protocol::ProtocolScorer>(
          [argv] { return std::make_unique<protocol::SubprocessTransport>(argv); },
          spec.to_string(), spec.batch_size, timeout);
    }
    case ScorerSpec::Kind::kTcp: {
      const auto colon = spec.argument.rfind(':');
      if (colon == std::string::npos) throw ScorerError(ScorerErrc::kConfig, "expected host:port");
      const std::string host = spec.argument.substr(0, colon);
      const double port = parse_double(spec.argument.substr(colon + 1));
      if (port < 1 || port > 65535 || port != std::floor(port)) {
        throw ScorerError(ScorerErrc::kConfig, "bad port");
      }
      return std::make_unique<protocol::ProtocolScorer>(
          [host, port, timeout] {
            return std::make_unique<protocol::TcpTransport>(host, static_cast<std::uint16_t>(port),
                                                            timeout);
          },
          spec.to_string(), spec.batch_size, timeout);
    }
  }
  throw ScorerError(ScorerErrc::kConfig, "unhandled scorer kind");
}

ScorerFactory make_scorer_factory(const ScorerSpec& spec) {
  return [spec] { return make_scorer(spec); };
}

}  // namespace saleval
