// Config-driven experiment runner. A JSON config supplies the fields of
// hire::ExperimentConfig; flags mirror a subset of them and override the
// file. Exit codes: 0 ok, 1 config error, 2 I/O error, 3 numeric failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hire/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hire: high-recall approximate top-k experiment runner"};

  std::string config_path;
  std::string mode, scorer, out, phi, instance;
  std::uint64_t seed = 0;
  std::size_t k = 0, k_prime = 0, rank = 0, shards = 0, group_size = 0;

  app.add_option("--config", config_path, "JSON config file");
  auto* opt_mode = app.add_option("--mode", mode, "experiment mode");
  auto* opt_seed = app.add_option("--seed", seed, "RNG seed");
  auto* opt_k = app.add_option("--k", k, "final top-k count");
  auto* opt_kprime = app.add_option("--kprime", k_prime, "candidate count k'");
  auto* opt_rank = app.add_option("--rank", rank, "low-rank r");
  auto* opt_shards = app.add_option("--shards", shards, "simulated devices");
  auto* opt_group = app.add_option("--group-size", group_size, "group size g");
  auto* opt_out = app.add_option("--out", out, "output CSV path");
  auto* opt_scorer = app.add_option("--scorer", scorer, "approx scorer kind");
  auto* opt_phi = app.add_option("--phi", phi, "activation");
  auto* opt_instance = app.add_option("--instance", instance,
                                      "instance source");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return hire::kExitConfigError;
  }

  hire::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = hire::load_config_file(config_path);
  } catch (const hire::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return hire::kExitConfigError;
  } catch (const hire::IoError& e) {
    std::cerr << e.what() << "\n";
    return hire::kExitIoError;
  }

  if (*opt_mode) cfg.mode = mode;
  if (*opt_seed) cfg.seed = seed;
  if (*opt_k) cfg.k = k;
  if (*opt_kprime) cfg.k_prime = {k_prime};
  if (*opt_rank) cfg.rank = rank;
  if (*opt_shards) cfg.shards = shards;
  if (*opt_group) cfg.g = group_size;
  if (*opt_out) cfg.out = out;
  if (*opt_scorer) cfg.scorer = scorer;
  if (*opt_phi) cfg.phi = phi;
  if (*opt_instance) cfg.instance = instance;

  return hire::run_experiment_catching(cfg);
}
