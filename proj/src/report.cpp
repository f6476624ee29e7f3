#include "saleval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace saleval {

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw CsvError("missing CSV column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.emplace_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    throw CsvError("field '" + s + "' contains a separator");
  }
}

Metric metric_field(const std::string& s) {
  const auto m = parse_metric(s);
  if (!m) throw CsvError("unknown metric '" + s + "'");
  return *m;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    auto fields = split_fields(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) {
        throw CsvError("row has " + std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw CsvError("empty CSV");
  return t;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double_field(const std::string& text) {
  if (text == "nan" || text == "NaN" || text.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || used == 0) throw CsvError("not a number: '" + text + "'");
  return v;
}

std::string write_per_image_csv(const std::vector<MetricRecord>& records) {
  std::ostringstream os;
  os << "image,method,metric,value,orientation,degenerate\n";
  for (const auto& r : records) {
    check_field(r.image);
    check_field(r.method);
    os << r.image << ',' << r.method << ',' << metric_name(r.metric) << ','
       << format_double(r.degenerate ? std::numeric_limits<double>::quiet_NaN() : r.value) << ','
       << orientation_name(orientation(r.metric)) << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<MetricRecord> read_per_image_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  const auto ci = t.column("image"), cm = t.column("method"), cx = t.column("metric"),
             cv = t.column("value"), cd = t.column("degenerate");
  std::vector<MetricRecord> out;
  for (const auto& row : t.rows) {
    MetricRecord r;
    r.image = row[ci];
    r.method = row[cm];
    r.metric = metric_field(row[cx]);
    r.value = parse_double_field(row[cv]);
    r.degenerate = row[cd] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AggregateRecord> aggregate(const std::vector<MetricRecord>& records) {
  std::vector<std::string> methods;
  struct Acc {
    double sum = 0.0;
    std::size_t count = 0, degenerate = 0;
    bool seen = false;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    Acc& a = acc[{r.method, static_cast<int>(r.metric)}];
    a.seen = true;
    if (r.degenerate || std::isnan(r.value)) {
      ++a.degenerate;
    } else {
      a.sum += r.value;
      ++a.count;
    }
  }
  std::vector<AggregateRecord> out;
  for (const auto& m : methods) {
    for (Metric metric : kAllMetrics) {
      const auto it = acc.find({m, static_cast<int>(metric)});
      if (it == acc.end()) continue;
      const Acc& a = it->second;
      out.push_back({m, metric,
                     a.count ? a.sum / static_cast<double>(a.count)
                             : std::numeric_limits<double>::quiet_NaN(),
                     orientation(metric), a.count, a.degenerate});
    }
  }
  return out;
}

std::string write_aggregate_csv(const std::vector<AggregateRecord>& records) {
  std::ostringstream os;
  os << "approach,metric,value,orientation,count,degenerate\n";
  for (const auto& r : records) {
    check_field(r.approach);
    os << r.approach << ',' << metric_name(r.metric) << ',' << format_double(r.value) << ','
       << orientation_name(r.orientation) << ',' << r.count << ',' << r.degenerate << '\n';
  }
  return os.str();
}

namespace {

struct TableBuilder {
  MetricTable table;
  std::map<std::pair<std::size_t, std::size_t>, double> cells;

  std::size_t approach(const std::string& name) {
    auto it = std::find(table.approaches.begin(), table.approaches.end(), name);
    if (it != table.approaches.end()) return static_cast<std::size_t>(it - table.approaches.begin());
    table.approaches.push_back(name);
    return table.approaches.size() - 1;
  }

  std::size_t metric(Metric m, Orientation o) {
    const Index c = table.column(m);
    if (c >= 0) {
      if (table.orientations[static_cast<std::size_t>(c)] != o) {
        throw CsvError("conflicting orientations for " + std::string(metric_name(m)));
      }
      return static_cast<std::size_t>(c);
    }
    table.metrics.push_back(m);
    table.orientations.push_back(o);
    return table.metrics.size() - 1;
  }

  void set(std::size_t a, std::size_t m, double v) {
    if (!cells.emplace(std::make_pair(a, m), v).second) {
      throw CsvError("duplicate entry for " + table.approaches[a] + "/" +
                     std::string(metric_name(table.metrics[m])));
    }
  }

  MetricTable finish() {
    table.values = Eigen::MatrixXd::Constant(static_cast<Index>(table.approaches.size()),
                                             static_cast<Index>(table.metrics.size()),
                                             std::numeric_limits<double>::quiet_NaN());
    for (const auto& [key, v] : cells) {
      table.values(static_cast<Index>(key.first), static_cast<Index>(key.second)) = v;
    }
    return std::move(table);
  }
};

}  // namespace

MetricTable read_metric_table_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  const auto ca = t.column("approach"), cm = t.column("metric"), cv = t.column("value");
  const auto has_orientation =
      std::find(t.header.begin(), t.header.end(), "orientation") != t.header.end();
  const std::size_t co = has_orientation ? t.column("orientation") : 0;
  TableBuilder b;
  for (const auto& row : t.rows) {
    const Metric m = metric_field(row[cm]);
    Orientation o = orientation(m);
    if (has_orientation) {
      const auto parsed = parse_orientation(row[co]);
      if (!parsed) throw CsvError("unknown orientation '" + row[co] + "'");
      o = *parsed;
    }
    const std::size_t a = b.approach(row[ca]);
    b.set(a, b.metric(m, o), parse_double_field(row[cv]));
  }
  return b.finish();
}

MetricTable to_metric_table(const std::vector<AggregateRecord>& records) {
  TableBuilder b;
  for (const auto& r : records) b.set(b.approach(r.approach), b.metric(r.metric, r.orientation), r.value);
  return b.finish();
}

std::vector<MetricTable> per_image_tables(const std::vector<MetricRecord>& records,
                                          std::vector<std::string>* image_names) {
  std::vector<std::string> images;
  std::vector<TableBuilder> builders;
  for (const auto& r : records) {
    auto it = std::find(images.begin(), images.end(), r.image);
    std::size_t k;
    if (it == images.end()) {
      images.push_back(r.image);
      builders.emplace_back();
      k = images.size() - 1;
    } else {
      k = static_cast<std::size_t>(it - images.begin());
    }
    TableBuilder& b = builders[k];
    b.set(b.approach(r.method), b.metric(r.metric, orientation(r.metric)),
          r.degenerate ? std::numeric_limits<double>::quiet_NaN() : r.value);
  }
  std::vector<MetricTable> out;
  for (auto& b : builders) out.push_back(b.finish());
  if (image_names) *image_names = images;
  return out;
}

nlohmann::json report_json(const std::vector<MetricRecord>& records,
                           const std::vector<AggregateRecord>& aggregates,
                           const Provenance& provenance) {
  using nlohmann::json;
  auto value = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json j;
  j["provenance"] = {{"scorer", provenance.scorer},
                     {"config", provenance.config},
                     {"config_hash", provenance.config_hash},
                     {"score_kind", "probability"}};
  json images = json::object();
  for (const auto& r : records) {
    images[r.image][r.method][std::string(metric_name(r.metric))] =
        r.degenerate ? json(nullptr) : value(r.value);
  }
  j["images"] = images;
  json agg = json::object();
  for (const auto& a : aggregates) {
    agg[a.approach][std::string(metric_name(a.metric))] = {
        {"mean", value(a.value)},
        {"orientation", std::string(orientation_name(a.orientation))},
        {"count", a.count},
        {"degenerate", a.degenerate}};
  }
  j["aggregate"] = agg;
  return j;
}

std::string write_square_csv(const std::vector<std::string>& labels, const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << "metric";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    os << labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

std::string write_ranks_csv(const GroupRanks& ranks) {
  std::ostringstream os;
  os << "approach,mask_rank,highlight_rank,ties\n";
  for (std::size_t a = 0; a < ranks.approaches.size(); ++a) {
    os << ranks.approaches[a] << ',' << format_double(ranks.mask[a]) << ','
       << format_double(ranks.highlight[a]) << ',' << tie_strategy_name(ranks.ties) << '\n';
  }
  return os.str();
}

}  // namespace saleval
