// saleval: batch faithfulness evaluation of saliency maps.
//
//   saleval eval  --images DIR --maps DIR --scorer SPEC --out DIR
//   saleval agree REPORT [--ties ordinal] --out DIR
//   saleval embed REPORT --out DIR
//   saleval rise  --images DIR --scorer SPEC --out DIR
//
// Exit codes: 0 success, 1 configuration error, 2 partial failures.

#include "saleval/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace saleval;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartial = 2;

std::vector<Metric> parse_metric_list(const std::string& text) {
  std::vector<Metric> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto m = parse_metric(item);
    if (!m) throw CLI::ValidationError("--metrics", "unknown metric '" + item + "'");
    if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
  }
  if (out.empty()) throw CLI::ValidationError("--metrics", "no metrics given");
  return out;
}

// Accepts either a report directory or a CSV file.
fs::path resolve(const fs::path& input, const char* file) {
  return fs::is_directory(input) ? input / file : input;
}

void report_problems(const std::vector<std::string>& lines, const char* what) {
  for (const auto& l : lines) std::cerr << "saleval: " << what << ": " << l << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbation-based faithfulness metrics for saliency maps"};
  app.require_subcommand(1);

  // eval
  auto* eval = app.add_subcommand("eval", "Compute the seven metrics for every image/map pair");
  std::string images, maps, scorer_text, metrics_text = "DAUC,IAUC,DC,IC,IIC,AD,ADD", out,
                                         normalize_insertion = "on", manifest;
  Index block = 0;
  double blur_sigma = 0.0;
  std::size_t samples = 0, batch = 32;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int timeout_ms = 30000;
  eval->add_option("--images", images, "Directory of .pgm/.ppm/.tnsr images")->required();
  eval->add_option("--maps", maps, "Directory with one subdirectory of .tnsr maps per method");
  eval->add_option("--manifest", manifest, "CSV (image,method,map) instead of --maps");
  eval->add_option("--scorer", scorer_text, "cmd:<argv> | tcp:<host:port> | builtin:<name>=<args>")
      ->required();
  eval->add_option("--metrics", metrics_text, "Comma-separated subset of the seven metrics");
  eval->add_option("--r", block, "Pixels per saliency cell (default: derived from shapes)");
  eval->add_option("--blur-sigma", blur_sigma, "Insertion blur sigma in pixels (default: 5 px per 448 px)");
  eval->add_option("--normalize-insertion", normalize_insertion, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  eval->add_option("--samples", samples, "Evaluate a seeded random subset of this many images");
  eval->add_option("--seed", seed, "Sampling seed");
  eval->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  eval->add_option("--batch", batch, "Images per external scorer request")->check(CLI::PositiveNumber);
  eval->add_option("--timeout-ms", timeout_ms, "External scorer reply timeout");
  eval->add_option("--out", out, "Output directory")->required();

  // agree
  auto* agree = app.add_subcommand("agree", "Kendall-tau agreement and group ranks");
  std::string agree_input, per_image_input, ties = "fractional", tau_mode = "aggregate", agree_out;
  bool include_iic = false;
  agree->add_option("report", agree_input, "aggregate.csv, a metric table CSV, or an eval output directory")
      ->required();
  agree->add_option("--per-image", per_image_input, "per_image.csv for --tau-mode per-image");
  agree->add_option("--ties", ties, "fractional|ordinal")->check(CLI::IsMember({"fractional", "ordinal"}));
  agree->add_option("--tau-mode", tau_mode, "aggregate|per-image")
      ->check(CLI::IsMember({"aggregate", "per-image"}));
  agree->add_flag("--include-iic", include_iic, "Keep IIC in the tau matrix");
  agree->add_option("--out", agree_out, "Output directory")->required();

  // embed
  auto* embed = app.add_subcommand("embed", "t-SNE of per-image metric rankings");
  std::string embed_input, embed_out;
  TsneConfig tsne;
  embed->add_option("report", embed_input, "per_image.csv or an eval output directory")->required();
  auto* perplexity_opt = embed->add_option("--perplexity", tsne.perplexity, "t-SNE perplexity");
  embed->add_option("--iterations", tsne.iterations, "Gradient steps");
  embed->add_option("--learning-rate", tsne.learning_rate, "Step size");
  embed->add_option("--seed", tsne.seed, "Initialization seed");
  embed->add_option("--out", embed_out, "Output directory")->required();

  // rise
  auto* rise = app.add_subcommand("rise", "Randomized-mask saliency maps");
  std::string rise_images, rise_scorer, rise_out;
  RiseOptions rise_opts;
  std::size_t rise_samples = 0;
  rise->add_option("--images", rise_images, "Directory of images")->required();
  rise->add_option("--scorer", rise_scorer, "Scorer spec")->required();
  rise->add_option("--masks", rise_opts.rise.masks, "Number of masks");
  rise->add_option("--grid", rise_opts.rise.grid, "Mask grid resolution");
  rise->add_option("--keep", rise_opts.rise.keep_probability, "Cell keep probability");
  rise->add_option("--seed", rise_opts.rise.seed, "Mask seed");
  rise->add_option("--r", rise_opts.block, "Block-average output maps by this factor");
  rise->add_option("--samples", rise_samples, "Seeded random subset of images");
  rise->add_option("--workers", rise_opts.workers, "Worker threads")->check(CLI::PositiveNumber);
  rise->add_option("--out", rise_out, "Directory for <stem>.tnsr maps")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*eval) {
      if (maps.empty() && manifest.empty()) {
        std::cerr << "saleval: eval needs --maps or --manifest\n";
        return kConfigError;
      }
      ScorerSpec spec = ScorerSpec::parse(scorer_text);
      spec.batch_size = batch;
      spec.timeout_ms = timeout_ms;
      EvalOptions opts;
      opts.images = images;
      opts.maps = maps;
      if (!manifest.empty()) opts.manifest = manifest;
      opts.metrics = parse_metric_list(metrics_text);
      opts.metric_config.block = block;
      if (blur_sigma > 0.0) opts.metric_config.blur_sigma = blur_sigma;
      opts.metric_config.normalize_insertion = normalize_insertion == "on";
      opts.metric_config.batch_size = batch;
      if (samples > 0) opts.samples = samples;
      opts.seed = seed;
      opts.workers = workers;
      const EvalResult r = run_eval(opts, make_scorer_factory(spec), spec.to_string());
      write_eval_outputs(r, out);
      report_problems(r.unpaired, "unpaired");
      report_problems(r.failures, "failed");
      std::cerr << "saleval: " << r.records.size() << " metric values written to " << out << "\n";
      return r.partial() ? kPartial : kOk;
    }
    if (*agree) {
      AgreeOptions opts;
      opts.table = read_metric_table_csv(read_text(resolve(agree_input, "aggregate.csv")));
      opts.ties = *parse_tie_strategy(ties);
      opts.include_iic = include_iic;
      opts.per_image_tau = tau_mode == "per-image";
      fs::path per_image = per_image_input;
      if (per_image.empty() && fs::is_directory(agree_input)) per_image = fs::path(agree_input) / "per_image.csv";
      if (!per_image.empty() && fs::exists(per_image)) {
        opts.per_image = read_per_image_csv(read_text(per_image));
      }
      const AgreeResult r = run_agree(opts);
      write_agree_outputs(r, agree_out);
      if (!r.ranks_available) std::cerr << "saleval: group ranks skipped: " << r.ranks_note << "\n";
      return kOk;
    }
    if (*embed) {
      EmbedOptions opts;
      opts.per_image = read_per_image_csv(read_text(resolve(embed_input, "per_image.csv")));
      opts.tsne = tsne;
      opts.perplexity_set = perplexity_opt->count() > 0;
      const EmbedResult r = run_embed(opts);
      write_embed_outputs(r, embed_out);
      std::cerr << "saleval: embedded " << r.points.size() << " rankings (perplexity "
                << r.perplexity << ", KL " << r.kl << ", " << r.degenerate_pairs
                << " degenerate pairs, " << r.skipped_rankings << " skipped)\n";
      return kOk;
    }
    if (*rise) {
      const ScorerSpec spec = ScorerSpec::parse(rise_scorer);
      rise_opts.images = rise_images;
      if (rise_samples > 0) rise_opts.samples = rise_samples;
      rise_opts.rise.validate();
      const RiseResult r = run_rise(rise_opts, make_scorer_factory(spec), rise_out);
      report_problems(r.failures, "failed");
      std::cerr << "saleval: wrote " << r.written.size() << " maps to " << rise_out << "\n";
      return r.failures.empty() ? kOk : kPartial;
    }
  } catch (const std::exception& e) {
    std::cerr << "saleval: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
