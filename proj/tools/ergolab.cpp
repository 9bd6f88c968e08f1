// Command-line runner over the C API.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ergolab/ergolab.h"

namespace {

int run(const std::string& command, const std::string& config, const std::string& out, std::uint64_t seed,
        bool have_seed, unsigned threads, bool have_threads, bool quiet) {
  ergolab_config* cfg = nullptr;
  if (ergolab_config_load(config.c_str(), &cfg) != ERGOLAB_OK) {
    std::fprintf(stderr, "error: %s\n", ergolab_last_error());
    return 1;
  }
  if (!out.empty()) ergolab_config_set_out_dir(cfg, out.c_str());
  if (have_seed) ergolab_config_set_seed(cfg, seed);
  if (have_threads) ergolab_config_set_threads(cfg, threads);

  ergolab_run* r = nullptr;
  const int st = ergolab_run_command(cfg, command.c_str(), &r);
  if (st != ERGOLAB_OK) {
    std::fprintf(stderr, "error: %s\n", ergolab_last_error());
    ergolab_config_free(cfg);
    return 1;
  }
  const int code = ergolab_run_exit_code(r);
  for (size_t i = 0; i < ergolab_run_message_count(r); ++i) {
    const std::string msg = ergolab_run_message(r, i);
    if (code == 1 || msg.rfind("warning", 0) == 0)
      std::fprintf(stderr, "%s\n", msg.c_str());
  }
  if (!quiet) {
    std::printf("%s -> %s\n", command.c_str(), ergolab_config_out_dir(cfg));
    for (size_t i = 0; i < ergolab_run_check_count(r); ++i)
      std::printf("  %-24s %s  %s\n", ergolab_run_check_name(r, i), ergolab_run_check_pass(r, i) ? "pass" : "FAIL",
                  ergolab_run_check_detail(r, i));
    std::printf("  %zu files written, exit %d\n", ergolab_run_file_count(r), code);
  }
  ergolab_run_free(r);
  ergolab_config_free(cfg);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergolab: statistical properties of interval maps with critical points"};
  app.set_version_flag("--version", ergolab_version());
  app.require_subcommand(1);

  std::string config, out;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool quiet = false;

  const char* commands[][2] = {
      {"analyze-map", "verify declared orders and expansion away from the critical set"},
      {"induce", "build the inducing partition and its summability tables"},
      {"spectrum", "transfer operators, invariant densities, spectral and renewal checks"},
      {"limits", "CLT, functional CLT, decay of correlations and large deviations"},
  };
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts, thread_opts;
  for (auto& c : commands) {
    CLI::App* s = app.add_subcommand(c[0], c[1]);
    s->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out, "output directory (overrides [output] dir)");
    seed_opts.push_back(s->add_option("--seed", seed, "random seed (overrides [stats] seed)"));
    thread_opts.push_back(s->add_option("--threads", threads, "worker threads, 0 for all cores"));
    s->add_flag("--quiet,-q", quiet, "print nothing on success");
    subs.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed())
      return run(subs[i]->get_name(), config, out, seed, seed_opts[i]->count() > 0, threads,
                 thread_opts[i]->count() > 0, quiet);
  return 1;
}
