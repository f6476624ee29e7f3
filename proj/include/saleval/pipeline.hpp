#pragma once

#include "saleval/agreement.hpp"
#include "saleval/embedding.hpp"
#include "saleval/report.hpp"
#include "saleval/rise.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace saleval {

namespace fs = std::filesystem;

/// Runs `body(index, worker)` for index in [0, count) on `workers` threads.
/// Indices are handed out in increasing order; `body` must write results to
/// per-index slots so output order does not depend on scheduling.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t, unsigned)>& body);

/// Image files (.pgm, .ppm, .tnsr) in a directory, sorted by filename.
std::vector<fs::path> list_images(const fs::path& dir);

/// Seeded shuffle of the sorted list, keep the first `count`, re-sorted.
std::vector<fs::path> sample_paths(std::vector<fs::path> sorted, std::size_t count,
                                   std::uint64_t seed);

/// Evaluation inputs. Maps are paired to images by stem:
///   images/x.pgm  <->  maps/<method>/x.tnsr
/// A manifest (CSV with columns image,method,map) may replace the directory
/// convention.
struct EvalOptions {
  fs::path images;
  fs::path maps;
  std::optional<fs::path> manifest;
  std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  MetricConfig metric_config;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct EvalResult {
  std::vector<MetricRecord> records;  // sorted by image, then method
  std::vector<AggregateRecord> aggregates;
  std::vector<std::string> failures;   // image-level scorer or format failures
  std::vector<std::string> unpaired;   // images without maps and vice versa
  Provenance provenance;

  bool partial() const { return !failures.empty() || !unpaired.empty(); }
};

EvalResult run_eval(const EvalOptions& options, const ScorerFactory& scorers,
                    const std::string& scorer_id);

/// Writes per_image.csv, aggregate.csv and report.json into `out`.
void write_eval_outputs(const EvalResult& result, const fs::path& out);

struct AgreeOptions {
  MetricTable table;
  std::optional<std::vector<MetricRecord>> per_image;
  TieStrategy ties = TieStrategy::kFractional;
  bool per_image_tau = false;  // average per-image tau instead of tau over aggregates
  bool include_iic = false;
};

struct AgreeResult {
  TauMatrix tau;
  Eigen::MatrixXd distance;
  GroupRanks ranks;
  bool ranks_available = true;
  std::string ranks_note;
};

AgreeResult run_agree(const AgreeOptions& options);

/// Writes tau.csv, distance.csv, ranks.csv and agreement.json.
void write_agree_outputs(const AgreeResult& result, const fs::path& out);

/// One embedded point per (metric, image); IIC never takes part.
struct EmbedPoint {
  Metric metric;
  std::string image;
  double x = 0.0, y = 0.0;
};

struct EmbedOptions {
  std::vector<MetricRecord> per_image;
  TsneConfig tsne;
  bool perplexity_set = false;  // otherwise min(30, (n - 1) / 3)
};

struct EmbedResult {
  std::vector<EmbedPoint> points;
  double kl = 0.0;
  double perplexity = 0.0;
  std::size_t degenerate_pairs = 0;
  std::size_t skipped_rankings = 0;  // (metric, image) pairs with missing values
};

EmbedResult run_embed(const EmbedOptions& options);

/// coords.csv and embedding.svg.
void write_embed_outputs(const EmbedResult& result, const fs::path& out);

std::string scatter_svg(const std::vector<EmbedPoint>& points);

struct RiseOptions {
  fs::path images;
  RiseConfig rise;
  Index block = 1;  // block-average the full-resolution map by this factor
  std::optional<std::size_t> samples;
  std::uint64_t sample_seed = 0;
  unsigned workers = 1;
};

struct RiseResult {
  std::vector<std::string> written;  // stems, sorted
  std::vector<std::string> failures;
};

/// Writes <out>/<stem>.tnsr per image.
RiseResult run_rise(const RiseOptions& options, const ScorerFactory& scorers, const fs::path& out);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace saleval
