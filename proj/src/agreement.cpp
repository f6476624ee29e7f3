#include "saleval/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace saleval {
namespace {

std::int64_t pairs(std::int64_t t) { return t * (t - 1) / 2; }

// Counts strict inversions while merge-sorting v.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

template <typename Eq>
std::int64_t tied_pairs(const std::vector<std::size_t>& order, Eq equal) {
  std::int64_t total = 0, run = 1;
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (equal(order[k - 1], order[k])) {
      ++run;
    } else {
      total += pairs(run);
      run = 1;
    }
  }
  return total + pairs(run);
}

}  // namespace

TauStats kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("tau inputs differ in length");
  if (x.size() < 2) throw DegenerateError("tau needs two or more items");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw std::invalid_argument("tau input contains NaN");
  }
  const auto n = static_cast<std::int64_t>(x.size());

  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const std::int64_t tx = tied_pairs(order, [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const std::int64_t txy = tied_pairs(
      order, [&](std::size_t a, std::size_t b) { return x[a] == x[b] && y[a] == y[b]; });

  std::vector<double> ys(x.size()), scratch(x.size());
  for (std::size_t k = 0; k < order.size(); ++k) ys[k] = y[order[k]];
  const std::int64_t discordant = count_inversions(ys, scratch, 0, ys.size());

  // ys is now sorted, so y ties are adjacent.
  std::int64_t ty = 0, run = 1;
  for (std::size_t k = 1; k < ys.size(); ++k) {
    if (ys[k] == ys[k - 1]) {
      ++run;
    } else {
      ty += pairs(run);
      run = 1;
    }
  }
  ty += pairs(run);

  TauStats s;
  s.discordant = discordant;
  s.ties_both = txy;
  s.ties_x = tx - txy;
  s.ties_y = ty - txy;
  s.concordant = pairs(n) - tx - ty + txy - discordant;
  const double pq = static_cast<double>(s.concordant + s.discordant);
  // One square root of the exact product keeps |tau| = 1 exact for reversals.
  const double denom = std::sqrt((pq + static_cast<double>(s.ties_y)) *
                                 (pq + static_cast<double>(s.ties_x)));
  if (!(denom > 0.0)) throw DegenerateError("tau undefined: an input is constant");
  s.tau = std::clamp(static_cast<double>(s.concordant - s.discordant) / denom, -1.0, 1.0);
  return s;
}

double tau_distance(double tau) {
  if (std::isnan(tau) || tau < -1.0 || tau > 1.0) {
    throw std::invalid_argument("tau must lie in [-1, 1]");
  }
  return 0.0 - std::log((std::max(tau, kTauFloor) + 1.0) / 2.0);  // +0 at tau = 1
}

std::string_view tie_strategy_name(TieStrategy t) {
  return t == TieStrategy::kFractional ? "fractional" : "ordinal";
}

std::optional<TieStrategy> parse_tie_strategy(std::string_view name) {
  if (name == "fractional") return TieStrategy::kFractional;
  if (name == "ordinal") return TieStrategy::kOrdinal;
  return std::nullopt;
}

RankVector rank_with_ties(std::span<const double> values, Orientation orientation,
                          TieStrategy ties) {
  if (values.empty()) throw std::invalid_argument("cannot rank an empty list");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("ranked values must be finite");
  }
  const bool lower = orientation == Orientation::kLowerBetter;
  auto better = [&](std::size_t a, std::size_t b) {
    return lower ? values[a] < values[b] : values[a] > values[b];
  };
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), better);

  RankVector r{std::vector<double>(values.size()), orientation, ties};
  for (std::size_t pos = 0; pos < order.size();) {
    std::size_t end = pos + 1;
    if (ties == TieStrategy::kFractional) {
      while (end < order.size() && values[order[end]] == values[order[pos]]) ++end;
    }
    // Positions pos..end-1 share the mean of ranks pos+1..end.
    const double shared = 0.5 * static_cast<double>(pos + 1 + end);
    for (std::size_t k = pos; k < end; ++k) r.ranks[order[k]] = shared;
    pos = end;
  }
  return r;
}

Index MetricTable::column(Metric m) const {
  const auto it = std::find(metrics.begin(), metrics.end(), m);
  return it == metrics.end() ? -1 : static_cast<Index>(it - metrics.begin());
}

Eigen::VectorXd MetricTable::oriented_column(Index col) const {
  const double sign =
      orientations[static_cast<std::size_t>(col)] == Orientation::kLowerBetter ? -1.0 : 1.0;
  return sign * values.col(col);
}

GroupRanks group_average_ranks(const MetricTable& table, TieStrategy ties) {
  GroupRanks out;
  out.approaches = table.approaches;
  out.ties = ties;
  const std::size_t n = table.approaches.size();
  auto group_mean = [&](std::span<const Metric> group) {
    std::vector<double> mean(n, 0.0);
    for (Metric m : group) {
      const Index col = table.column(m);
      if (col < 0) {
        throw std::invalid_argument("metric table lacks column " + std::string(metric_name(m)));
      }
      const Eigen::VectorXd v = table.values.col(col);
      const auto r = rank_with_ties(std::span<const double>(v.data(), n),
                                    table.orientations[static_cast<std::size_t>(col)], ties);
      for (std::size_t a = 0; a < n; ++a) mean[a] += r.ranks[a];
    }
    for (double& v : mean) v /= static_cast<double>(group.size());
    return mean;
  };
  out.mask = group_mean(kMaskGroup);
  out.highlight = group_mean(kHighlightGroup);
  return out;
}

DistanceMatrix tau_distance_matrix(const std::vector<std::vector<double>>& points) {
  const auto n = static_cast<Index>(points.size());
  DistanceMatrix d{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Identity(n, n), 0};
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      double tau = std::numeric_limits<double>::quiet_NaN();
      try {
        tau = kendall_tau(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]).tau;
      } catch (const DegenerateError&) {
        ++d.degenerate_pairs;
      }
      d.tau(i, j) = d.tau(j, i) = tau;
      d.distance(i, j) = d.distance(j, i) = tau_distance(std::isnan(tau) ? 0.0 : tau);
    }
  }
  return d;
}

TauMatrix tau_matrix(const std::vector<Metric>& metrics, const std::vector<MetricTable>& tables) {
  const auto m = static_cast<Index>(metrics.size());
  TauMatrix out{metrics, Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXi::Zero(m, m)};
  for (const auto& table : tables) {
    std::vector<Eigen::VectorXd> cols;
    for (Metric metric : metrics) {
      const Index c = table.column(metric);
      if (c < 0) throw std::invalid_argument("table lacks column " + std::string(metric_name(metric)));
      cols.push_back(table.oriented_column(c));
    }
    for (Index i = 0; i < m; ++i) {
      for (Index j = i + 1; j < m; ++j) {
        const auto& a = cols[static_cast<std::size_t>(i)];
        const auto& b = cols[static_cast<std::size_t>(j)];
        if (!a.allFinite() || !b.allFinite()) continue;
        try {
          out.tau(i, j) += kendall_tau(std::span<const double>(a.data(), a.size()),
                                       std::span<const double>(b.data(), b.size()))
                               .tau;
          ++out.support(i, j);
        } catch (const DegenerateError&) {
        }
      }
    }
  }
  for (Index i = 0; i < m; ++i) {
    out.tau(i, i) = 1.0;
    out.support(i, i) = static_cast<int>(tables.size());
    for (Index j = i + 1; j < m; ++j) {
      const double v = out.support(i, j) > 0 ? out.tau(i, j) / out.support(i, j)
                                             : std::numeric_limits<double>::quiet_NaN();
      out.tau(i, j) = out.tau(j, i) = v;
      out.support(j, i) = out.support(i, j);
    }
  }
  return out;
}

}  // namespace saleval
