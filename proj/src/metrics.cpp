#include "saleval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace saleval {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kDauc: return "DAUC";
    case Metric::kIauc: return "IAUC";
    case Metric::kDc: return "DC";
    case Metric::kIc: return "IC";
    case Metric::kIic: return "IIC";
    case Metric::kAd: return "AD";
    case Metric::kAdd: return "ADD";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    const auto ref = metric_name(m);
    if (ref.size() == name.size() &&
        std::equal(ref.begin(), ref.end(), name.begin(),
                   [](char a, char b) { return a == std::toupper(static_cast<unsigned char>(b)); })) {
      return m;
    }
  }
  return std::nullopt;
}

Orientation orientation(Metric m) {
  return (m == Metric::kDauc || m == Metric::kAd) ? Orientation::kLowerBetter
                                                  : Orientation::kHigherBetter;
}

std::string_view orientation_name(Orientation o) {
  return o == Orientation::kLowerBetter ? "lower" : "higher";
}

std::optional<Orientation> parse_orientation(std::string_view name) {
  if (name == "lower" || name == "lower-better") return Orientation::kLowerBetter;
  if (name == "higher" || name == "higher-better") return Orientation::kHigherBetter;
  return std::nullopt;
}

std::vector<double> ScoreCurve::normalized() const {
  const double top = *std::max_element(scores.begin(), scores.end());
  if (!(top > 0.0)) throw DegenerateError("curve maximum is not positive");
  std::vector<double> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), [top](double c) { return c / top; });
  return out;
}

double trapezoid_auc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("trapezoid needs two or more aligned points");
  }
  double area = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) area += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return area;
}

double curve_auc(const ScoreCurve& curve, bool normalize) {
  if (!normalize) return trapezoid_auc(curve.fractions, curve.scores);
  const auto n = curve.normalized();
  return trapezoid_auc(curve.fractions, n);
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (x.size() < 2) throw DegenerateError("correlation needs two or more samples");
  const auto n = static_cast<Index>(x.size());
  const Eigen::Map<const Eigen::ArrayXd> xa(x.data(), n), ya(y.data(), n);
  const Eigen::ArrayXd dx = xa - xa.mean();
  const Eigen::ArrayXd dy = ya - ya.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("zero variance");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

TrackedScore track(Scorer& scorer, const Image& image) {
  const ScoreVector s = scorer.score(image);
  const Index k = predicted_category(s);
  return {k, s[k]};
}

double relative_drop(double base, double perturbed) {
  return std::max(0.0, base - perturbed) / base;
}

int iic(const Image& image, const SaliencyMap& saliency, Scorer& scorer, UpsampleMode mode) {
  const TrackedScore t = track(scorer, image);
  const double masked = scorer.score(apply_saliency_mask(image, saliency, mode))[t.category];
  return t.score < masked ? 1 : 0;
}

double average_drop(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                    UpsampleMode mode) {
  const TrackedScore t = track(scorer, image);
  return relative_drop(t.score,
                       scorer.score(apply_saliency_mask(image, saliency, mode))[t.category]);
}

double average_drop_deletion(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                             UpsampleMode mode) {
  const TrackedScore t = track(scorer, image);
  return relative_drop(
      t.score, scorer.score(apply_inverse_saliency_mask(image, saliency, mode))[t.category]);
}

namespace {

MaskSequence checked_sequence(const Image& image, const SaliencyMap& saliency, Index block) {
  const Index r = block_factor(image.height(), image.width(), saliency.rows(), saliency.cols());
  if (r != block) {
    throw DimensionError("block factor " + std::to_string(block) + " does not match shapes (" +
                         std::to_string(r) + ")");
  }
  return MaskSequence(saliency, block);
}

// Applies `advance` once per step to a working image, scoring every state.
// c_0 is `start_score`; states are scored in batches since each step depends
// only on the previous mask, not on any score.
template <typename Advance>
ScoreCurve progressive_curve(Image work, const MaskSequence& order, Scorer& scorer,
                             Index category, double start_score, std::size_t batch_size,
                             Advance advance) {
  const Index steps = order.steps();
  ScoreCurve curve;
  curve.fractions.resize(static_cast<std::size_t>(steps) + 1);
  for (Index k = 0; k <= steps; ++k) {
    curve.fractions[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(steps);
  }
  curve.scores.reserve(static_cast<std::size_t>(steps) + 1);
  curve.scores.push_back(start_score);

  batch_size = std::max<std::size_t>(1, batch_size);
  std::vector<Image> pending;
  pending.reserve(batch_size);
  auto flush = [&] {
    for (const auto& s : scorer.score_batch(pending)) curve.scores.push_back(s[category]);
    pending.clear();
  };
  for (Index k = 1; k <= steps; ++k) {
    advance(work, order.step(k));
    pending.push_back(work);
    if (pending.size() == batch_size) flush();
  }
  if (!pending.empty()) flush();
  return curve;
}

ScoreCurve deletion_curve_tracked(const Image& image, const MaskSequence& order, Scorer& scorer,
                                  const TrackedScore& t, std::size_t batch_size) {
  const Index r = order.block();
  return progressive_curve(image, order, scorer, t.category, t.score, batch_size,
                           [r](Image& img, const MaskStep& st) { zero_block(img, st, r); });
}

ScoreCurve insertion_curve_tracked(const Image& image, const MaskSequence& order, Scorer& scorer,
                                   const TrackedScore& t, const BlurConfig& blur,
                                   std::size_t batch_size) {
  const Index r = order.block();
  Image blurred = gaussian_blur(image, blur);
  const double start = scorer.score(blurred)[t.category];
  return progressive_curve(std::move(blurred), order, scorer, t.category, start, batch_size,
                           [&image, r](Image& img, const MaskStep& st) { copy_block(img, image, st, r); });
}

}  // namespace

ScoreCurve deletion_curve(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                          Index block, std::size_t batch_size) {
  const MaskSequence order = checked_sequence(image, saliency, block);
  return deletion_curve_tracked(image, order, scorer, track(scorer, image), batch_size);
}

ScoreCurve insertion_curve(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                           Index block, const BlurConfig& blur, std::size_t batch_size) {
  const MaskSequence order = checked_sequence(image, saliency, block);
  return insertion_curve_tracked(image, order, scorer, track(scorer, image), blur, batch_size);
}

double dauc(const Image& image, const SaliencyMap& saliency, Scorer& scorer, Index block) {
  return curve_auc(deletion_curve(image, saliency, scorer, block));
}

double iauc(const Image& image, const SaliencyMap& saliency, Scorer& scorer, Index block,
            const BlurConfig& blur, bool normalize) {
  return curve_auc(insertion_curve(image, saliency, scorer, block, blur), normalize);
}

DropSeries deletion_drops(const ScoreCurve& curve, const MaskSequence& order) {
  DropSeries d;
  d.saliency = order.saliency_values();
  for (std::size_t k = 1; k < curve.scores.size(); ++k) {
    d.change.push_back(curve.scores[k - 1] - curve.scores[k]);
  }
  return d;
}

DropSeries insertion_gains(const ScoreCurve& curve, const MaskSequence& order) {
  DropSeries d;
  d.saliency = order.saliency_values();
  for (std::size_t k = 1; k < curve.scores.size(); ++k) {
    d.change.push_back(curve.scores[k] - curve.scores[k - 1]);
  }
  return d;
}

double deletion_correlation(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                            Index block) {
  const MaskSequence order = checked_sequence(image, saliency, block);
  const auto d = deletion_drops(deletion_curve_tracked(image, order, scorer, track(scorer, image), 32), order);
  return pearson_correlation(d.saliency, d.change);
}

double insertion_correlation(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                             Index block, const BlurConfig& blur) {
  const MaskSequence order = checked_sequence(image, saliency, block);
  const auto d = insertion_gains(
      insertion_curve_tracked(image, order, scorer, track(scorer, image), blur, 32), order);
  return pearson_correlation(d.saliency, d.change);
}

BlurConfig MetricConfig::blur_for(const Image& image) const {
  return blur_sigma ? BlurConfig{*blur_sigma} : BlurConfig::scaled_for(image.height(), image.width());
}

std::string MetricConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "block=" << block << ";blur=";
  if (blur_sigma) {
    os << *blur_sigma;
  } else {
    os << "auto";
  }
  os << ";normalize_insertion=" << normalize_insertion
     << ";upsample=" << (upsample == UpsampleMode::kNearest ? "nearest" : "bilinear");
  return os.str();
}

std::string MetricConfig::hash() const { return fnv1a_hex(canonical()); }

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

template <typename F>
MetricValue guarded(F&& f) {
  MetricValue v;
  try {
    v.value = f();
  } catch (const DegenerateError& e) {
    v.degenerate = true;
    v.note = e.what();
  }
  return v;
}

}  // namespace

MetricRow evaluate_all(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                       const MetricConfig& config) {
  const Index r = config.block != 0
                      ? config.block
                      : block_factor(image.height(), image.width(), saliency.rows(), saliency.cols());
  const MaskSequence order = checked_sequence(image, saliency, r);

  MetricRow row;
  row.tracked = track(scorer, image);
  const TrackedScore& t = row.tracked;

  const double highlighted =
      scorer.score(apply_saliency_mask(image, saliency, config.upsample))[t.category];
  const double removed =
      scorer.score(apply_inverse_saliency_mask(image, saliency, config.upsample))[t.category];
  row[Metric::kIic].value = t.score < highlighted ? 1.0 : 0.0;
  row[Metric::kAd].value = relative_drop(t.score, highlighted);
  row[Metric::kAdd].value = relative_drop(t.score, removed);

  const ScoreCurve del = deletion_curve_tracked(image, order, scorer, t, config.batch_size);
  const ScoreCurve ins =
      insertion_curve_tracked(image, order, scorer, t, config.blur_for(image), config.batch_size);

  row[Metric::kDauc] = guarded([&] { return curve_auc(del); });
  row[Metric::kIauc] = guarded([&] { return curve_auc(ins, config.normalize_insertion); });
  row[Metric::kDc] = guarded([&] {
    const auto d = deletion_drops(del, order);
    return pearson_correlation(d.saliency, d.change);
  });
  row[Metric::kIc] = guarded([&] {
    const auto d = insertion_gains(ins, order);
    return pearson_correlation(d.saliency, d.change);
  });
  return row;
}

}  // namespace saleval
