#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ergolab {

/// One `key = value` line of a sectioned key-value text file.
struct KvEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

struct KvDocument {
  std::string source;
  std::vector<KvEntry> entries;
};

/// Accepts `[section]` headers, `key = value` lines, blank lines and
/// comments starting with `#` or `;`. Errors carry `source:line`.
KvDocument parse_kv(std::string_view text, std::string_view source);

std::string read_text_file(const std::string& path);

std::vector<std::string> split_ws(std::string_view text);

[[noreturn]] void parse_error(std::string_view source, int line, const std::string& what);

double parse_double(std::string_view token, std::string_view source, int line,
                    std::string_view field);
std::int64_t parse_int(std::string_view token, std::string_view source, int line,
                       std::string_view field);
std::uint64_t parse_u64(std::string_view token, std::string_view source, int line,
                        std::string_view field);

}  // namespace ergolab
