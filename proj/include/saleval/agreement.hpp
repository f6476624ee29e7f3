#pragma once

#include "saleval/metrics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace saleval {

/// Pair counts behind Kendall's tau. Pairs tied in both inputs count in
/// `ties_both` only.
struct TauStats {
  std::int64_t concordant = 0;  // P
  std::int64_t discordant = 0;  // Q
  std::int64_t ties_x = 0;      // T, tied in x only
  std::int64_t ties_y = 0;      // U, tied in y only
  std::int64_t ties_both = 0;
  double tau = 0.0;
};

/// tau = (P - Q) / (sqrt(P + Q + U) * sqrt(P + Q + T)), in O(n log n).
/// Throws DegenerateError when the denominator vanishes.
TauStats kendall_tau(std::span<const double> x, std::span<const double> y);

/// -ln((tau + 1) / 2) with tau clamped below at -0.999.
double tau_distance(double tau);

inline constexpr double kTauFloor = -0.999;

enum class TieStrategy { kFractional, kOrdinal };

std::string_view tie_strategy_name(TieStrategy t);
std::optional<TieStrategy> parse_tie_strategy(std::string_view name);

struct RankVector {
  std::vector<double> ranks;  // 1 = best
  Orientation orientation = Orientation::kHigherBetter;
  TieStrategy ties = TieStrategy::kFractional;
};

/// Ranks values so the best gets 1. Fractional ties share their mean
/// position; ordinal ties keep input order.
RankVector rank_with_ties(std::span<const double> values, Orientation orientation,
                          TieStrategy ties);

/// Approaches x metrics table of aggregate values.
struct MetricTable {
  std::vector<std::string> approaches;
  std::vector<Metric> metrics;
  std::vector<Orientation> orientations;  // per metric column
  Eigen::MatrixXd values;                 // approaches x metrics

  Index column(Metric m) const;  // -1 when absent
  bool has(Metric m) const { return column(m) >= 0; }
  /// Column values flipped so larger is always better.
  Eigen::VectorXd oriented_column(Index col) const;
};

inline constexpr std::array<Metric, 3> kMaskGroup = {Metric::kDc, Metric::kDauc, Metric::kAdd};
inline constexpr std::array<Metric, 4> kHighlightGroup = {Metric::kIc, Metric::kIauc, Metric::kAd,
                                                          Metric::kIic};

struct GroupRanks {
  std::vector<std::string> approaches;
  std::vector<double> mask;       // mean rank over DC, DAUC, ADD
  std::vector<double> highlight;  // mean rank over IC, IAUC, AD, IIC
  TieStrategy ties = TieStrategy::kFractional;
};

/// Throws std::invalid_argument when a group metric column is missing.
GroupRanks group_average_ranks(const MetricTable& table, TieStrategy ties);

/// Pairwise tau distances between rankings (each row of `points` is one
/// ranking over the same items, larger = better). Degenerate pairs (a
/// ranking with all ties) are flagged and assigned the distance of tau = 0.
struct DistanceMatrix {
  Eigen::MatrixXd distance;
  Eigen::MatrixXd tau;  // NaN where degenerate; 1 on the diagonal
  std::size_t degenerate_pairs = 0;
};

DistanceMatrix tau_distance_matrix(const std::vector<std::vector<double>>& points);

/// Metric-by-metric tau. Each table contributes one tau per metric pair
/// (computed over its approaches, oriented so larger is better); the result
/// is the mean over tables where the pair is non-degenerate, NaN when there
/// is none. The diagonal is 1.
struct TauMatrix {
  std::vector<Metric> metrics;
  Eigen::MatrixXd tau;
  Eigen::MatrixXi support;  // number of tables that contributed
};

TauMatrix tau_matrix(const std::vector<Metric>& metrics, const std::vector<MetricTable>& tables);

}  // namespace saleval
