#include "saleval/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace saleval {

std::string scatter_svg(const std::vector<EmbedPoint>& points) {
  constexpr double kSize = 600.0, kMargin = 40.0, kLegend = 110.0;
  constexpr std::array<const char*, 7> kColors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2"};
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    const auto [xl, xh] = std::minmax_element(points.begin(), points.end(),
                                              [](const auto& a, const auto& b) { return a.x < b.x; });
    const auto [yl, yh] = std::minmax_element(points.begin(), points.end(),
                                              [](const auto& a, const auto& b) { return a.y < b.y; });
    xmin = xl->x, xmax = xh->x, ymin = yl->y, ymax = yh->y;
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  auto px = [&](double x) { return kMargin + (x - xmin) / span * (kSize - 2 * kMargin); };
  auto py = [&](double y) { return kSize - kMargin - (y - ymin) / span * (kSize - 2 * kMargin); };

  std::ostringstream os;
  char buf[160];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + kLegend << "\" height=\""
     << kSize << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
                  px(p.x), py(p.y), kColors[static_cast<std::size_t>(p.metric)]);
    os << buf;
  }
  int row = 0;
  for (Metric m : kAllMetrics) {
    if (std::none_of(points.begin(), points.end(), [m](const auto& p) { return p.metric == m; })) continue;
    const double y = kMargin + 20.0 * row++;
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"%s\"/><text x=\"%.1f\" y=\"%.1f\" "
                  "font-family=\"sans-serif\" font-size=\"13\">",
                  kSize + 10, y, kColors[static_cast<std::size_t>(m)], kSize + 22, y + 4);
    os << buf << metric_name(m) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace saleval
