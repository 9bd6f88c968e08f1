#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ergolab {

/// Table written as RFC 4180 CSV; doubles use 17 significant digits.
class CsvTable {
 public:
  using Cell = std::variant<double, std::int64_t, std::string>;

  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

std::string format_double(double x);
std::string csv_escape(std::string_view field);

/// Writes to path.tmp and renames over path.
void write_file_atomic(const std::string& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool points = false;  // markers instead of a polyline
};

struct PlotSpec {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<std::string> notes;  // annotation lines, top right
};

/// Self-contained SVG line plot; non-positive values are skipped on log axes.
std::string svg_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace ergolab
