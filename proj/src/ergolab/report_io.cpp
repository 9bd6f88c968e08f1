#include "ergolab/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ergolab/error.hpp"

namespace ergolab {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
  return buf;
}

std::string csv_escape(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void CsvTable::add(std::vector<Cell> row) {
  if (row.size() != header_.size())
    fail(ErrorCode::internal, "csv row has " + std::to_string(row.size()) + " fields, header " +
                                  std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const auto& fields, auto&& fmt) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fmt(fields[i]);
    }
    out += "\r\n";
  };
  line(header_, [](const std::string& s) { return csv_escape(s); });
  for (const auto& r : rows_) {
    line(r, [](const Cell& c) {
      if (const double* d = std::get_if<double>(&c)) return format_double(*d);
      if (const std::int64_t* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
      return csv_escape(std::get<std::string>(c));
    });
  }
  return out;
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) fail(ErrorCode::io, "cannot create directory " + p.parent_path().string() + ": " + ec.message());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::io, "write failed for " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) fail(ErrorCode::io, "cannot rename " + tmp + ": " + ec.message());
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v, bool log) {
  char buf[32];
  if (log) {
    std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::string svg_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0) && (!spec.log_y || y > 0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  if (spec.log_y) y0 = std::floor(y0), y1 = std::ceil(y1);
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return T + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
       "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       xml_escape(spec.title) + "</text>\n";
  o += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0, fy = y0 + (y1 - y0) * i / 5.0;
    const double sx = L + pw * i / 5.0, sy = T + ph - ph * i / 5.0;
    o += "<line x1=\"" + num(sx) + "\" y1=\"" + num(T + ph) + "\" x2=\"" + num(sx) + "\" y2=\"" +
         num(T + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(sx) + "\" y=\"" + num(T + ph + 18) + "\" text-anchor=\"middle\">" +
         tick_label(fx, spec.log_x) + "</text>\n";
    o += "<line x1=\"" + num(L - 5) + "\" y1=\"" + num(sy) + "\" x2=\"" + num(L) + "\" y2=\"" + num(sy) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(L - 8) + "\" y=\"" + num(sy + 4) + "\" text-anchor=\"end\">" +
         tick_label(fy, spec.log_y) + "</text>\n";
  }
  o += "<text x=\"" + num(L + pw / 2) + "\" y=\"" + num(H - 12) + "\" text-anchor=\"middle\">" +
       xml_escape(spec.x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"" + num(T + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(T + ph / 2) + ")\">" + xml_escape(spec.y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = kColors[k % 6];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      if (s.points) {
        o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"2.5\" fill=\"" +
             col + "\"/>\n";
      } else {
        pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      }
    }
    if (!pts.empty())
      o += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
    const double ly = T + 16 + 16 * static_cast<double>(k);
    o += "<line x1=\"" + num(L + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(L + 30) + "\" y2=\"" +
         num(ly - 4) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + num(L + 35) + "\" y=\"" + num(ly) + "\">" + xml_escape(s.label) + "</text>\n";
  }
  for (std::size_t i = 0; i < spec.notes.size(); ++i)
    o += "<text x=\"" + num(L + pw - 8) + "\" y=\"" + num(T + 16 + 16 * static_cast<double>(i)) +
         "\" text-anchor=\"end\">" + xml_escape(spec.notes[i]) + "</text>\n";
  o += "</svg>\n";
  return o;
}

}  // namespace ergolab
