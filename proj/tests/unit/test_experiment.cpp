#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ergolab/error.hpp"
#include "ergolab/experiment.hpp"

using namespace ergolab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ExperimentConfig cfg_for(const std::string& body, const std::string& out) {
  auto c = parse_config("schema_version = 1\n" + body, "test.cfg");
  c.out_dir = (fs::temp_directory_path() / out).string();
  return c;
}

bool has_file(const RunResult& r, const std::string& f) {
  return std::find(r.files.begin(), r.files.end(), f) != r.files.end();
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(parse_config("schema_version = 1\n[map]\nbuiltin = ulam\n", "a.cfg"));
  auto expect_parse_error = [](const std::string& text, const std::string& needle) {
    try {
      (void)parse_config(text, "a.cfg");
      CHECK_MESSAGE(false, text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::parse);
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  expect_parse_error("schema_version = 1\n[stats]\nN = 10\n", "missing map");
  expect_parse_error("schema_version = 1\n[map]\nbuiltin = ulam\n[stats]\ncolour = 3\n", "a.cfg:5");
  expect_parse_error("schema_version = 1\n[map]\nbuiltin = ulam\n[stats]\nN = -5\n", "a.cfg:5");
  expect_parse_error("schema_version = 1\n[map]\nbuiltin = henon\n", "a.cfg:3");
  expect_parse_error("[map]\nbuiltin = ulam\n", "schema_version");
  expect_parse_error("schema_version = 2\n[map]\nbuiltin = ulam\n", "a.cfg:1");
  expect_parse_error("schema_version = 1\n[map]\n", "missing map");
  expect_parse_error("schema_version = 1\n[mapp]\nbuiltin = ulam\n", "unknown section");
}

TEST_CASE("config hash tracks effective values") {
  auto a = parse_config("schema_version = 1\n[map]\nbuiltin = ulam\n", "a.cfg");
  auto b = parse_config("schema_version = 1\n# comment\n[map]\nbuiltin = ulam\n[stats]\nseed = 1\n", "b.cfg");
  CHECK(a.hash() == b.hash());
  b.stats.seed = 2;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("analyze-map") {
  const auto c = cfg_for("[map]\nbuiltin = ulam\n[analysis]\nexpansion_orbits = 200\n", "ergolab_t_analyze");
  fs::remove_all(c.out_dir);
  const auto r = run_command("analyze-map", c);
  CHECK(r.exit_code == exit_ok);
  CHECK(has_file(r, "order_c0.5+.csv"));
  CHECK(has_file(r, "expansion.csv"));
  CHECK(fs::exists(fs::path(c.out_dir) / "order_c0.5+.csv"));
  CHECK(fs::exists(fs::path(c.out_dir) / "manifest-analyze-map.txt"));

  const auto w = cfg_for("[map]\nbuiltin = ulam\ncritical = 0.5 plus 3\n[analysis]\nexpansion_orbits = 200\n",
                         "ergolab_t_analyze_bad");
  const auto rw = run_command("analyze-map", w);
  CHECK(rw.exit_code == exit_validation);
  bool named = false;
  for (const auto& m : rw.messages) named = named || m.find("c0.5+") != std::string::npos;
  CHECK(named);
  fs::remove_all(c.out_dir);
  fs::remove_all(w.out_dir);
}

TEST_CASE("induce") {
  const auto c = cfg_for("[map]\nbuiltin = doubling\n[inducing]\nq0 = 10\n", "ergolab_t_induce");
  fs::remove_all(c.out_dir);
  const auto r = run_command("induce", c);
  CHECK(r.exit_code == exit_ok);
  CHECK(lines(fs::path(c.out_dir) / "cells.csv") == 1024 + 1);
  for (const char* f : {"summability.csv", "propbind.csv", "F_conditions.csv"}) CHECK(has_file(r, f));

  const auto w = cfg_for("[map]\nbuiltin = ulam\n[inducing]\ntau_max = 1\n", "ergolab_t_induce_warn");
  fs::remove_all(w.out_dir);
  CHECK(run_command("induce", w).exit_code == exit_warning);
  fs::remove_all(c.out_dir);
  fs::remove_all(w.out_dir);
}

TEST_CASE("spectrum on doubling k=2") {
  const auto c = cfg_for("[map]\nbuiltin = doubling\n[operator]\nk = 2\nk_gap = 64\nk_scheme = 64\n[inducing]\nq0 = 6\n",
                         "ergolab_t_spectrum");
  fs::remove_all(c.out_dir);
  const auto r = run_command("spectrum", c);
  CHECK(slurp(fs::path(c.out_dir) / "operator_Lf.csv") ==
        "row,col,value\r\n0,0,0.5\r\n0,1,0.5\r\n1,0,0.5\r\n1,1,0.5\r\n");
  CHECK(has_file(r, "renewal.csv"));
  CHECK(has_file(r, "density.csv"));
  fs::remove_all(c.out_dir);
}

TEST_CASE("limits are reproducible and reuse the cache") {
  const std::string body =
      "[map]\nbuiltin = doubling\n[stats]\nN = 2000\nn = 1000\nobservable = cos2pi\n"
      "decay_N = 200\ndecay_window = 2000\nld_N = 2000\nld_grid = 10 20 40\nks_threshold = 0.1\n";
  const auto c = cfg_for(body, "ergolab_t_limits");
  fs::remove_all(c.out_dir);
  const auto r1 = run_command("limits", c);
  CHECK(r1.exit_code != exit_validation);
  const std::string clt1 = slurp(fs::path(c.out_dir) / "clt.csv");
  CHECK(has_file(r1, "decay.svg"));
  auto c2 = c;
  c2.threads = 3;
  const auto r2 = run_command("limits", c2);
  CHECK(slurp(fs::path(c.out_dir) / "clt.csv") == clt1);
  CHECK(r2.files == r1.files);
  fs::remove_all(c.out_dir);
}
