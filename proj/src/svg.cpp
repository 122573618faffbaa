#include "taf/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "taf/errors.hpp"

namespace taf {

namespace {

// Distinct hues for up to 20 actions; wraps around after that.
const char* kPalette[] = {
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
};
constexpr int kPaletteSize = 20;

}  // namespace

std::string svg_heatmap(const Matrix& values, const std::string& title) {
  const long rows = values.rows();
  const long cols = values.cols();
  const double cell = std::max(2.0, std::min(12.0, 720.0 / std::max(rows, cols)));
  const double width = cols * cell;
  const double height = rows * cell + 18;
  const double vmax = std::max(values.maxCoeff(), 1e-300);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "<text x=\"2\" y=\"12\" font-size=\"11\" font-family=\"monospace\">"
     << title << "</text>\n";
  char buf[160];
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      const int shade =
          255 - static_cast<int>(255.0 * std::min(1.0, values(i, j) / vmax));
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\""
                    " fill=\"rgb(%d,%d,%d)\"/>\n",
                    j * cell, 18 + i * cell, cell, cell, shade, shade, 255);
      os << buf;
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_label_bands(const std::vector<std::vector<int>>& rows,
                            const std::vector<std::string>& row_titles,
                            int num_actions) {
  if (rows.empty()) throw shape_error("no label rows");
  const long frames = static_cast<long>(rows.front().size());
  const double band_h = 26.0;
  const double label_h = 14.0;
  const double width = std::max<double>(200.0, std::min(1200.0, frames * 2.0));
  const double px = width / static_cast<double>(frames);
  const double height = rows.size() * (band_h + label_h) + 4;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  char buf[200];
  for (size_t r = 0; r < rows.size(); ++r) {
    const double y0 = r * (band_h + label_h);
    os << "<text x=\"2\" y=\"" << y0 + 11
       << "\" font-size=\"10\" font-family=\"monospace\">"
       << (r < row_titles.size() ? row_titles[r] : "") << "</text>\n";
    // merge equal-label runs into single rects
    long start = 0;
    for (long i = 1; i <= frames; ++i) {
      if (i < frames && rows[r][i] == rows[r][start]) continue;
      const int label = rows[r][start];
      const char* color =
          label == kIgnoreLabel
              ? "#000000"
              : kPalette[((label % kPaletteSize) + kPaletteSize) % kPaletteSize];
      (void)num_actions;
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" "
                    "height=\"%.1f\" fill=\"%s\"/>\n",
                    start * px, y0 + label_h, (i - start) * px, band_h, color);
      os << buf;
      start = i;
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << svg;
}

}  // namespace taf
