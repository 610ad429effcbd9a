#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ieiclust/csv.hpp"
#include "ieiclust/tsne.hpp"
#include "ieiclust/types.hpp"

namespace ieiclust {

inline constexpr std::array<const char*, 12> kClusterPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a"};

inline constexpr const char* kNoiseColor = "#999999";

struct ScatterAnnotation {
  int cluster = 0;
  DiseaseLabel dominant = DiseaseLabel::CGD;
  double fraction = 0.0;
  int count = 0;
  double x = 0.0;  // centroid in embedding space
  double y = 0.0;
};

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

// Writes the 2-D embedding as a static SVG scatter colored by cluster, with
// one "<dominant disease> <fraction> (<count>)" annotation per non-noise
// cluster, plus a row-per-point CSV. Output bytes are a pure function of the
// inputs.
inline void emit_scatter(const Embedding2D& embedding,
                         const std::vector<int>& cluster_labels,
                         const std::vector<DiseaseLabel>& diseases,
                         std::ostream& svg_out, std::ostream& csv_out,
                         const std::string& title = "") {
  const int n = static_cast<int>(embedding.coords.rows());
  if (static_cast<int>(cluster_labels.size()) != n ||
      static_cast<int>(diseases.size()) != n)
    throw std::invalid_argument("emit_scatter: length mismatch");

  csv_out << "x,y,cluster,disease\n";
  for (int i = 0; i < n; ++i)
    csv_out << format_double(embedding.coords(i, 0)) << ','
            << format_double(embedding.coords(i, 1)) << ','
            << cluster_labels[i] << ',' << to_string(diseases[i]) << "\n";

  // Per-cluster composition for the annotations.
  std::map<int, std::map<DiseaseLabel, int>> tally;
  std::map<int, std::array<double, 2>> centroid_sum;
  std::map<int, int> size;
  for (int i = 0; i < n; ++i) {
    const int c = cluster_labels[i];
    if (c < 0) continue;
    ++tally[c][diseases[i]];
    auto& s = centroid_sum[c];
    s[0] += embedding.coords(i, 0);
    s[1] += embedding.coords(i, 1);
    ++size[c];
  }
  std::vector<ScatterAnnotation> annotations;
  for (const auto& [c, by_disease] : tally) {
    ScatterAnnotation a;
    a.cluster = c;
    a.count = size[c];
    int best = -1;
    for (const auto& [disease, count] : by_disease) {
      if (count > best) {  // map order: ties keep the earliest enum value
        best = count;
        a.dominant = disease;
      }
    }
    a.fraction = double(best) / double(a.count);
    a.x = centroid_sum[c][0] / a.count;
    a.y = centroid_sum[c][1] / a.count;
    annotations.push_back(a);
  }

  const double width = 800.0, height = 600.0, margin = 40.0;
  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  if (n > 0) {
    min_x = embedding.coords.col(0).minCoeff();
    max_x = embedding.coords.col(0).maxCoeff();
    min_y = embedding.coords.col(1).minCoeff();
    max_y = embedding.coords.col(1).maxCoeff();
  }
  if (max_x <= min_x) max_x = min_x + 1.0;
  if (max_y <= min_y) max_y = min_y + 1.0;
  auto sx = [&](double x) {
    return margin + (x - min_x) / (max_x - min_x) * (width - 2.0 * margin);
  };
  auto sy = [&](double y) {
    // SVG y grows downward.
    return height - margin -
           (y - min_y) / (max_y - min_y) * (height - 2.0 * margin);
  };

  svg_out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
          << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
          << "width=\"" << width << "\" height=\"" << height
          << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
          << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    svg_out << "<text x=\"" << detail::fixed2(width / 2.0)
            << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"16\">"
            << title << "</text>\n";
  for (int i = 0; i < n; ++i) {
    const int c = cluster_labels[i];
    const char* color =
        c < 0 ? kNoiseColor : kClusterPalette[c % kClusterPalette.size()];
    svg_out << "<circle cx=\"" << detail::fixed4(sx(embedding.coords(i, 0)))
            << "\" cy=\"" << detail::fixed4(sy(embedding.coords(i, 1)))
            << "\" r=\"3\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
  }
  for (const auto& a : annotations) {
    svg_out << "<text x=\"" << detail::fixed4(sx(a.x)) << "\" y=\""
            << detail::fixed4(sy(a.y))
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"13\" font-weight=\"bold\">"
            << to_string(a.dominant) << ' ' << detail::fixed2(a.fraction)
            << " (" << a.count << ")</text>\n";
  }
  svg_out << "</svg>\n";
}

}  // namespace ieiclust
