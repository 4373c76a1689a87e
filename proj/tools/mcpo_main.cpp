#include <glob.h>

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "mcpo/plotting.hpp"
#include "mcpo/selfcheck.hpp"
#include "mcpo/trainer.hpp"

namespace {

std::vector<std::string> expand_globs(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const std::string& a : args) {
    if (a.find_first_of("*?[") == std::string::npos) {
      out.push_back(a);
      continue;
    }
    glob_t g;
    if (glob(a.c_str(), 0, nullptr, &g) == 0) {
      for (size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
      globfree(&g);
    }
  }
  return out;
}

int cmd_train(const std::string& config_path, bool resume) {
  mcpo::harness::RunConfig cfg = mcpo::harness::load_config(config_path);
  std::filesystem::path root = mcpo::harness::run(cfg, resume);
  std::cout << "artifacts in " << root << std::endl;
  return 0;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& metric,
             const std::string& output) {
  std::vector<std::string> expanded = expand_globs(files);
  if (expanded.empty()) {
    std::cerr << "plot: no metrics files matched" << std::endl;
    return 1;
  }
  mcpo::harness::plot(expanded, metric, output);
  std::cout << "wrote " << output << " and " << output << ".csv" << std::endl;
  return 0;
}

int cmd_verify_bound(int instances, std::uint64_t seed) {
  auto suite = mcpo::selfcheck::run_bound_suite(instances, seed);
  std::printf("%-38s %6d/%-6d %s\n", "single-region lower bound",
              suite.bound_holds, suite.bound_checked,
              suite.bound_holds == suite.bound_checked ? "PASS" : "FAIL");
  std::printf("%-38s %6d/%-6d %s\n", "two-region improvement",
              suite.two_region_holds, suite.two_region_checked,
              suite.two_region_holds == suite.two_region_checked ? "PASS"
                                                                 : "FAIL");
  bool ok = suite.bound_holds == suite.bound_checked &&
            suite.two_region_holds == suite.two_region_checked;
  return ok ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed) {
  auto r = mcpo::harness::evaluate_checkpoint(checkpoint, episodes, seed);
  std::printf("episodes        %ld\n", r.episodes);
  std::printf("mean return     %.4f\n", r.mean_return);
  std::printf("std return      %.4f\n", r.std_return);
  std::printf("success rate    %.4f\n", r.success_rate);
  return 0;
}

int cmd_selftest(std::uint64_t seed) {
  int failures = 0;
  for (const auto& r : mcpo::selfcheck::run_all(seed)) {
    std::printf("%-42s %s  (%s)\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.detail.c_str());
    if (!r.pass) ++failures;
  }
  auto suite = mcpo::selfcheck::run_bound_suite(100, seed);
  bool bound_ok = suite.bound_holds == suite.bound_checked &&
                  suite.two_region_holds == suite.two_region_checked;
  std::printf("%-42s %s  (%d+%d instances)\n", "bound-suite-spot-check",
              bound_ok ? "PASS" : "FAIL", suite.bound_checked,
              suite.two_region_checked);
  if (!bound_ok) ++failures;
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"policy-gradient training with memory-constrained updates"};
  app.require_subcommand(1);

  std::string config_path;
  bool resume = false;
  CLI::App* train = app.add_subcommand("train", "run training from a config");
  train->add_option("config", config_path, "JSON config file")->required();
  train->add_flag("--resume", resume, "continue from existing checkpoints");

  std::vector<std::string> plot_files;
  std::string metric = "return_mean_100";
  std::string output = "plot.svg";
  CLI::App* plot = app.add_subcommand("plot", "aggregate metrics into an SVG");
  plot->add_option("files", plot_files, "metrics.jsonl files (globs ok)")
      ->required();
  plot->add_option("-o,--output", output, "output SVG path");
  plot->add_option("--metric", metric, "metric key to plot");

  int instances = 1000;
  std::uint64_t seed = 0;
  CLI::App* verify =
      app.add_subcommand("verify-bound", "randomized improvement-bound suite");
  verify->add_option("--instances", instances, "random MDP instances");
  verify->add_option("--seed", seed, "suite seed");

  std::string checkpoint;
  int episodes = 20;
  std::uint64_t eval_seed = 0;
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--episodes", episodes, "episode count");
  ev->add_option("--seed", eval_seed, "evaluation seed");

  std::uint64_t selftest_seed = 0;
  CLI::App* self =
      app.add_subcommand("selftest", "oracle and property spot checks");
  self->add_option("--seed", selftest_seed, "suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, resume);
    if (plot->parsed()) return cmd_plot(plot_files, metric, output);
    if (verify->parsed()) return cmd_verify_bound(instances, seed);
    if (ev->parsed()) return cmd_eval(checkpoint, episodes, eval_seed);
    if (self->parsed()) return cmd_selftest(selftest_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
