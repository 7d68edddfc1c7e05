// w2s_lab: command line front end for the experiment harness.
//
//   w2s_lab replicate-appendix-e [--config c.json] [--seed S] [--out rows.csv]
//   w2s_lab regimes | tails | diagnose  (same options)

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "w2s/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Weak-to-strong MNI experiments on bi-level ensembles"};
  app.require_subcommand(1);

  struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> parallelism;
    bool force = false;
  };
  Options opt;

  const std::pair<const char*, const char*> commands[] = {
      {"replicate-appendix-e", "accuracy of weak, weak-to-strong and clean baselines across u"},
      {"regimes", "phase classification over a two-axis grid"},
      {"tails", "lower-tail bound, quadrature and Monte Carlo for correlated Gaussian maxima"},
      {"diagnose", "survival and contamination traces of clean fits across n"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON configuration (defaults apply to missing keys)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "base seed, overrides the config");
    sub->add_option("--out", opt.out, "output CSV path")->default_str(std::string(name) + ".csv");
    sub->add_option("--parallelism", opt.parallelism, "worker threads, overrides the config")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--force", opt.force, "run configurations outside the theorem hypotheses");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : w2s::harness::kExitConfigInvalid;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (opt.out.empty()) opt.out = command + ".csv";

  w2s::harness::ExperimentConfig cfg;
  try {
    if (!opt.config.empty()) cfg = w2s::harness::load_config(opt.config);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.parallelism) cfg.parallelism = *opt.parallelism;
    w2s::harness::validate(cfg);
  } catch (const w2s::Error& e) {
    std::cerr << e.what() << "\n";
    return w2s::harness::kExitConfigInvalid;
  }
  return w2s::harness::run_command(command, cfg, opt.out, opt.force, std::cerr);
}
