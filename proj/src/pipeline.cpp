#include "saleval/pipeline.hpp"

#include "saleval/image_io.hpp"
#include "saleval/tensor_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace saleval {

void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t, unsigned)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, count))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](unsigned w) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i, w);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  if (error) std::rethrow_exception(error);
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()));
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".tnsr") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return out;
}

std::vector<fs::path> sample_paths(std::vector<fs::path> sorted, std::size_t count,
                                   std::uint64_t seed) {
  if (count >= sorted.size()) return sorted;
  std::mt19937_64 rng(seed);
  std::shuffle(sorted.begin(), sorted.end(), rng);
  sorted.resize(count);
  std::sort(sorted.begin(), sorted.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return sorted;
}

namespace {

struct Pairing {
  // image stem -> (method -> map path)
  std::map<std::string, std::map<std::string, fs::path>> maps;
  std::vector<std::string> methods;
};

Pairing pair_by_directory(const fs::path& maps_dir) {
  if (!fs::is_directory(maps_dir)) throw std::invalid_argument("not a directory: " + maps_dir.string());
  Pairing p;
  for (const auto& e : fs::directory_iterator(maps_dir)) {
    if (e.is_directory()) p.methods.push_back(e.path().filename().string());
  }
  std::sort(p.methods.begin(), p.methods.end());
  for (const auto& m : p.methods) {
    for (const auto& e : fs::directory_iterator(maps_dir / m)) {
      if (e.is_regular_file() && e.path().extension() == ".tnsr") {
        p.maps[e.path().stem().string()][m] = e.path();
      }
    }
  }
  return p;
}

Pairing pair_by_manifest(const fs::path& manifest) {
  const CsvTable t = parse_csv(read_text(manifest));
  const auto ci = t.column("image"), cm = t.column("method"), cp = t.column("map");
  Pairing p;
  std::set<std::string> methods;
  for (const auto& row : t.rows) {
    fs::path map = row[cp];
    if (map.is_relative()) map = manifest.parent_path() / map;
    p.maps[fs::path(row[ci]).stem().string()][row[cm]] = map;
    methods.insert(row[cm]);
  }
  p.methods.assign(methods.begin(), methods.end());
  return p;
}

}  // namespace

EvalResult run_eval(const EvalOptions& options, const ScorerFactory& scorers,
                    const std::string& scorer_id) {
  const auto all_images = list_images(options.images);
  const auto images = options.samples ? sample_paths(all_images, *options.samples, options.seed)
                                      : all_images;
  const Pairing pairing =
      options.manifest ? pair_by_manifest(*options.manifest) : pair_by_directory(options.maps);

  EvalResult result;
  result.provenance = {scorer_id, options.metric_config.canonical(), options.metric_config.hash()};

  std::set<std::string> known_stems;
  for (const auto& img : all_images) known_stems.insert(img.stem().string());
  for (const auto& [stem, by_method] : pairing.maps) {
    if (!known_stems.count(stem)) {
      for (const auto& [method, path] : by_method) {
        result.unpaired.push_back("map " + method + "/" + path.filename().string() + " has no image");
      }
    }
  }

  struct Slot {
    std::vector<MetricRecord> records;
    std::vector<std::string> failures;
    std::vector<std::string> unpaired;
  };
  std::vector<Slot> slots(images.size());
  std::vector<std::unique_ptr<Scorer>> worker_scorers(std::max(1u, options.workers));

  parallel_for(images.size(), options.workers, [&](std::size_t i, unsigned w) {
    auto& scorer = worker_scorers[w];
    if (!scorer) scorer = scorers();
    Slot& slot = slots[i];
    const std::string stem = images[i].stem().string();
    const auto found = pairing.maps.find(stem);
    for (const auto& method : pairing.methods) {
      if (found == pairing.maps.end() || !found->second.count(method)) {
        slot.unpaired.push_back(images[i].filename().string() + " has no map for " + method);
      }
    }
    if (found == pairing.maps.end()) return;

    Image image;
    try {
      image = load_image(images[i]);
    } catch (const std::exception& e) {
      slot.failures.push_back(stem + ": " + e.what());
      return;
    }
    for (const auto& [method, map_path] : found->second) {
      try {
        const SaliencyMap map = load_map(map_path);
        const MetricRow row = evaluate_all(image, map, *scorer, options.metric_config);
        for (Metric m : options.metrics) {
          slot.records.push_back({stem, method, m, row[m].value, row[m].degenerate});
        }
      } catch (const std::exception& e) {
        slot.failures.push_back(stem + "/" + method + ": " + e.what());
      }
    }
  });

  for (auto& s : slots) {
    result.records.insert(result.records.end(), s.records.begin(), s.records.end());
    result.failures.insert(result.failures.end(), s.failures.begin(), s.failures.end());
    result.unpaired.insert(result.unpaired.end(), s.unpaired.begin(), s.unpaired.end());
  }
  result.aggregates = aggregate(result.records);
  return result;
}

void write_eval_outputs(const EvalResult& result, const fs::path& out) {
  fs::create_directories(out);
  write_text(out / "per_image.csv", write_per_image_csv(result.records));
  write_text(out / "aggregate.csv", write_aggregate_csv(result.aggregates));
  auto j = report_json(result.records, result.aggregates, result.provenance);
  j["failures"] = result.failures;
  j["unpaired"] = result.unpaired;
  write_text(out / "report.json", j.dump(2) + "\n");
}

AgreeResult run_agree(const AgreeOptions& options) {
  std::vector<Metric> metrics;
  for (Metric m : kAllMetrics) {
    if (options.table.has(m) && (options.include_iic || m != Metric::kIic)) metrics.push_back(m);
  }
  if (metrics.size() < 2) throw std::invalid_argument("need at least two metrics to compare");

  AgreeResult r;
  if (options.per_image_tau) {
    if (!options.per_image) throw std::invalid_argument("per-image tau needs per-image records");
    r.tau = tau_matrix(metrics, per_image_tables(*options.per_image));
  } else {
    r.tau = tau_matrix(metrics, {options.table});
  }
  r.distance = r.tau.tau.unaryExpr([](double t) {
    return std::isnan(t) ? t : tau_distance(std::clamp(t, -1.0, 1.0));
  });
  try {
    r.ranks = group_average_ranks(options.table, options.ties);
  } catch (const std::invalid_argument& e) {
    r.ranks_available = false;
    r.ranks_note = e.what();
  }
  return r;
}

void write_agree_outputs(const AgreeResult& result, const fs::path& out) {
  fs::create_directories(out);
  std::vector<std::string> labels;
  for (Metric m : result.tau.metrics) labels.emplace_back(metric_name(m));
  write_text(out / "tau.csv", write_square_csv(labels, result.tau.tau));
  write_text(out / "distance.csv", write_square_csv(labels, result.distance));
  nlohmann::json j;
  j["metrics"] = labels;
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Index k = 0; k < m.cols(); ++k) row.push_back(std::isnan(m(i, k)) ? nlohmann::json(nullptr) : nlohmann::json(m(i, k)));
      rows.push_back(row);
    }
    return rows;
  };
  j["tau"] = matrix(result.tau.tau);
  j["distance"] = matrix(result.distance);
  if (result.ranks_available) {
    write_text(out / "ranks.csv", write_ranks_csv(result.ranks));
    j["ties"] = std::string(tie_strategy_name(result.ranks.ties));
    for (std::size_t a = 0; a < result.ranks.approaches.size(); ++a) {
      j["ranks"].push_back({{"approach", result.ranks.approaches[a]},
                            {"mask", result.ranks.mask[a]},
                            {"highlight", result.ranks.highlight[a]}});
    }
  } else {
    j["ranks_note"] = result.ranks_note;
  }
  write_text(out / "agreement.json", j.dump(2) + "\n");
}

EmbedResult run_embed(const EmbedOptions& options) {
  std::vector<std::string> image_names;
  const auto tables = per_image_tables(options.per_image, &image_names);
  std::vector<std::string> methods;
  for (const auto& r : options.per_image) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }

  EmbedResult result;
  std::vector<std::vector<double>> rankings;
  std::vector<std::pair<Metric, std::string>> labels;
  for (Metric m : kAllMetrics) {
    if (m == Metric::kIic) continue;
    for (std::size_t k = 0; k < tables.size(); ++k) {
      const MetricTable& t = tables[k];
      const Index col = t.column(m);
      if (col < 0) continue;
      const Eigen::VectorXd v = t.oriented_column(col);
      std::vector<double> ranking;
      for (const auto& method : methods) {
        const auto it = std::find(t.approaches.begin(), t.approaches.end(), method);
        if (it == t.approaches.end()) break;
        ranking.push_back(v[it - t.approaches.begin()]);
      }
      if (ranking.size() != methods.size() ||
          std::any_of(ranking.begin(), ranking.end(), [](double x) { return std::isnan(x); })) {
        ++result.skipped_rankings;
        continue;
      }
      rankings.push_back(std::move(ranking));
      labels.emplace_back(m, image_names[k]);
    }
  }
  if (rankings.size() < 2) throw std::invalid_argument("need at least two complete rankings to embed");

  const DistanceMatrix d = tau_distance_matrix(rankings);
  result.degenerate_pairs = d.degenerate_pairs;
  TsneConfig cfg = options.tsne;
  const double n = static_cast<double>(rankings.size());
  if (!options.perplexity_set) cfg.perplexity = std::max(1.0, std::min(30.0, (n - 1.0) / 3.0));
  result.perplexity = cfg.perplexity;
  const Embedding2D e = tsne_fit(d.distance, cfg);
  result.kl = e.kl;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    result.points.push_back({labels[i].first, labels[i].second, e.points(static_cast<Index>(i), 0),
                             e.points(static_cast<Index>(i), 1)});
  }
  return result;
}

void write_embed_outputs(const EmbedResult& result, const fs::path& out) {
  fs::create_directories(out);
  std::ostringstream os;
  os << "metric,image,x,y\n";
  for (const auto& p : result.points) {
    os << metric_name(p.metric) << ',' << p.image << ',' << format_double(p.x) << ','
       << format_double(p.y) << '\n';
  }
  write_text(out / "coords.csv", os.str());
  write_text(out / "embedding.svg", scatter_svg(result.points));
}

RiseResult run_rise(const RiseOptions& options, const ScorerFactory& scorers, const fs::path& out) {
  auto images = list_images(options.images);
  if (options.samples) images = sample_paths(images, *options.samples, options.sample_seed);
  fs::create_directories(out);

  std::vector<std::optional<std::string>> failures(images.size());
  std::vector<std::unique_ptr<Scorer>> worker_scorers(std::max(1u, options.workers));
  parallel_for(images.size(), options.workers, [&](std::size_t i, unsigned w) {
    auto& scorer = worker_scorers[w];
    if (!scorer) scorer = scorers();
    const std::string stem = images[i].stem().string();
    try {
      const Image image = load_image(images[i]);
      SaliencyMap map = rise_saliency(image, *scorer, std::nullopt, options.rise);
      if (options.block > 1) map = block_average(map, options.block);
      save_map(out / (stem + ".tnsr"), map);
    } catch (const std::exception& e) {
      failures[i] = stem + ": " + e.what();
    }
  });

  RiseResult result;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (failures[i]) {
      result.failures.push_back(*failures[i]);
    } else {
      result.written.push_back(images[i].stem().string());
    }
  }
  return result;
}

}  // namespace saleval
