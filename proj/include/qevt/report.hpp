#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace qevt {

// Shortest text that reads back to the same double ("inf"/"nan" spelled out).
std::string format_double(double v);

// Writes via a temporary file and rename; throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = false;
};

struct PlotBars {
  std::vector<double> edges;  // heights.size() + 1 bin edges
  std::vector<double> heights;
  std::string color = "#c7d7ea";
};

struct PlotRule {
  double y = 0.0;
  std::string label;
  std::string color = "#d62728";
};

// Minimal static line/histogram chart. Output depends only on the data, so
// identical inputs give identical files.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add(PlotSeries series) { series_.push_back(std::move(series)); }
  void add(PlotBars bars) { bars_.push_back(std::move(bars)); }
  // Dashed horizontal reference line.
  void add(PlotRule rule) { rules_.push_back(std::move(rule)); }

  std::string render() const;

 private:
  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<PlotSeries> series_;
  std::vector<PlotBars> bars_;
  std::vector<PlotRule> rules_;
};

}  // namespace qevt
