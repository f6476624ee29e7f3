#pragma once

#include "saleval/perturb.hpp"
#include "saleval/scorer.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace saleval {

/// Faithfulness metrics, in the column order used by reports.
enum class Metric { kDauc, kIauc, kDc, kIc, kIic, kAd, kAdd };

inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::kDauc, Metric::kIauc, Metric::kDc,
                                                      Metric::kIc,   Metric::kIic,  Metric::kAd,
                                                      Metric::kAdd};

enum class Orientation { kLowerBetter, kHigherBetter };

std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);
Orientation orientation(Metric m);
std::string_view orientation_name(Orientation o);
std::optional<Orientation> parse_orientation(std::string_view name);

/// Raised when a statistic is undefined for the given input (zero variance,
/// all ties, non-positive curve maximum).
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Score of the tracked category after k perturbation steps, k = 0..K.
struct ScoreCurve {
  std::vector<double> fractions;  // p_k = k / K
  std::vector<double> scores;     // raw c_k

  /// c_k / max_k c_k. Throws DegenerateError when the maximum is not positive.
  std::vector<double> normalized() const;
};

/// Aligned pairs (s_k, v_k): saliency of the block perturbed at step k and
/// the score change caused by that step.
struct DropSeries {
  std::vector<double> saliency;
  std::vector<double> change;
};

/// Trapezoidal area under y(x).
double trapezoid_auc(std::span<const double> x, std::span<const double> y);

/// Area under the max-normalized curve (or the raw curve if `normalize` is false),
/// including the unperturbed point.
double curve_auc(const ScoreCurve& curve, bool normalize = true);

/// Pearson r. Throws DegenerateError when either input has zero variance.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

/// The category argmax m(I) and its score; every perturbed score follows it.
struct TrackedScore {
  Index category = 0;
  double score = 0.0;
};

TrackedScore track(Scorer& scorer, const Image& image);

int iic(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
        UpsampleMode mode = UpsampleMode::kNearest);
double average_drop(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                    UpsampleMode mode = UpsampleMode::kNearest);
double average_drop_deletion(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                             UpsampleMode mode = UpsampleMode::kNearest);

/// Relative drop max(0, base - perturbed) / base.
double relative_drop(double base, double perturbed);

/// Progressive deletion to black, blocks in descending saliency.
ScoreCurve deletion_curve(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                          Index block, std::size_t batch_size = 32);

/// Progressive reveal of sharp blocks over a blurred copy.
ScoreCurve insertion_curve(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                           Index block, const BlurConfig& blur, std::size_t batch_size = 32);

double dauc(const Image& image, const SaliencyMap& saliency, Scorer& scorer, Index block);
double iauc(const Image& image, const SaliencyMap& saliency, Scorer& scorer, Index block,
            const BlurConfig& blur, bool normalize = true);

/// v_k = c_{k-1} - c_k against s_k.
DropSeries deletion_drops(const ScoreCurve& curve, const MaskSequence& order);
/// v_k = c_k - c_{k-1} against s_k.
DropSeries insertion_gains(const ScoreCurve& curve, const MaskSequence& order);

double deletion_correlation(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                            Index block);
double insertion_correlation(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                             Index block, const BlurConfig& blur);

struct MetricConfig {
  /// Image pixels per saliency cell; 0 derives it from the shapes.
  Index block = 0;
  /// Blur sigma; unset scales with image size (5 px at 448 px).
  std::optional<double> blur_sigma;
  bool normalize_insertion = true;
  UpsampleMode upsample = UpsampleMode::kNearest;
  std::size_t batch_size = 32;

  BlurConfig blur_for(const Image& image) const;
  /// Stable text form, hashed into report provenance.
  std::string canonical() const;
  std::string hash() const;
};

struct MetricValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
  std::string note;
};

/// All seven metrics for one (image, saliency map, scorer).
struct MetricRow {
  std::array<MetricValue, 7> values;
  TrackedScore tracked;

  const MetricValue& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
  MetricValue& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
};

/// Degenerate statistics are flagged in the row rather than thrown; scorer
/// errors propagate.
MetricRow evaluate_all(const Image& image, const SaliencyMap& saliency, Scorer& scorer,
                       const MetricConfig& config);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view text);

}  // namespace saleval
