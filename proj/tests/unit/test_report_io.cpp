#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ergolab/report_io.hpp"

using namespace ergolab;

TEST_CASE("csv formatting") {
  CsvTable t({"a", "b,c", "d"});
  t.add({0.1, std::int64_t{3}, std::string("say \"hi\"")});
  const std::string s = t.str();
  CHECK(s == "a,\"b,c\",d\r\n0.10000000000000001,3,\"say \"\"hi\"\"\"\r\n");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(1.0 / 3.0) == "0.33333333333333331");
  CHECK_THROWS(t.add({1.0}));
}

TEST_CASE("atomic write and hashing") {
  const auto dir = std::filesystem::temp_directory_path() / "ergolab_io_test";
  std::filesystem::remove_all(dir);
  const std::string path = (dir / "sub" / "x.txt").string();
  write_file_atomic(path, "hello");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "hello");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  std::filesystem::remove_all(dir);
}

TEST_CASE("svg plot") {
  PlotSpec spec;
  spec.title = "t <1>";
  spec.log_y = true;
  const auto svg = svg_plot(spec, {{"s", {0, 1, 2}, {1, 0.1, 0.0}, false}});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("t &lt;1&gt;") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}
