#include "ergolab/kv_text.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ergolab/error.hpp"

namespace ergolab {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void parse_error(std::string_view source, int line, const std::string& what) {
  std::string msg(source);
  if (line > 0) msg += ":" + std::to_string(line);
  msg += ": " + what;
  fail(ErrorCode::parse, msg);
}

KvDocument parse_kv(std::string_view text, std::string_view source) {
  KvDocument doc;
  doc.source = std::string(source);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    const auto hash = line.find_first_of("#;");
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') parse_error(source, line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) parse_error(source, line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parse_error(source, line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) parse_error(source, line_no, "missing key");
    doc.entries.push_back({section, std::string(key), std::string(value), line_no});
    if (nl == text.size()) break;
  }
  return doc;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != ',') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view token, std::string_view source, int line,
                    std::string_view field) {
  std::string s(trim(token));
  if (s.empty()) parse_error(source, line, "field '" + std::string(field) + "': empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    parse_error(source, line,
                "field '" + std::string(field) + "': not a finite number: '" + s + "'");
  return v;
}

std::int64_t parse_int(std::string_view token, std::string_view source, int line,
                       std::string_view field) {
  const auto t = trim(token);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    parse_error(source, line,
                "field '" + std::string(field) + "': not an integer: '" + std::string(t) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view token, std::string_view source, int line,
                        std::string_view field) {
  const auto t = trim(token);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    parse_error(source, line,
                "field '" + std::string(field) + "': not an unsigned integer: '" +
                    std::string(t) + "'");
  return v;
}

}  // namespace ergolab
