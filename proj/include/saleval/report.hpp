#pragma once

#include "saleval/agreement.hpp"
#include "saleval/metrics.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace saleval {

// per_image.csv:  image,method,metric,value,orientation,degenerate
// aggregate.csv:  approach,metric,value,orientation,count,degenerate
//
// Values are written with 17 significant digits so that they re-parse to
// the same doubles; degenerate values are written as "nan".

struct MetricRecord {
  std::string image;
  std::string method;
  Metric metric = Metric::kDauc;
  double value = 0.0;
  bool degenerate = false;
};

struct AggregateRecord {
  std::string approach;
  Metric metric = Metric::kDauc;
  double value = 0.0;  // mean over non-degenerate images
  Orientation orientation = Orientation::kHigherBetter;
  std::size_t count = 0;       // images contributing to the mean
  std::size_t degenerate = 0;  // images excluded as degenerate
};

struct Provenance {
  std::string scorer;
  std::string config;
  std::string config_hash;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimal CSV: comma separated, no quoting, first line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws CsvError if absent
};

CsvTable parse_csv(std::string_view text);

std::string format_double(double v);
double parse_double_field(const std::string& text);

std::string write_per_image_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_per_image_csv(std::string_view text);

/// Means per (method, metric). Methods keep first-appearance order, metrics
/// the canonical column order.
std::vector<AggregateRecord> aggregate(const std::vector<MetricRecord>& records);

std::string write_aggregate_csv(const std::vector<AggregateRecord>& records);

/// Reads any CSV with columns approach, metric, value[, orientation]. Approach
/// order is the order of first appearance; a missing orientation column falls
/// back to each metric's default.
MetricTable read_metric_table_csv(std::string_view text);

MetricTable to_metric_table(const std::vector<AggregateRecord>& records);

/// One table per image (approaches = methods), in first-appearance order of
/// images. Degenerate entries are NaN.
std::vector<MetricTable> per_image_tables(const std::vector<MetricRecord>& records,
                                          std::vector<std::string>* image_names = nullptr);

nlohmann::json report_json(const std::vector<MetricRecord>& records,
                           const std::vector<AggregateRecord>& aggregates,
                           const Provenance& provenance);

std::string write_square_csv(const std::vector<std::string>& labels, const Eigen::MatrixXd& m);

std::string write_ranks_csv(const GroupRanks& ranks);

}  // namespace saleval
