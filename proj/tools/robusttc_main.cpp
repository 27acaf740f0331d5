#include "robusttc/commands.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Robust task clustering with multi-metric few-shot learning"};
  app.require_subcommand(1);

  robusttc::CommonOptions options;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config_path, "JSON config file");
    sub->add_option("--seed", options.seed, "root random seed (overrides config)");
    sub->add_option("--out", options.out_dir, "output directory (overrides config)");
  };

  auto* simulate = app.add_subcommand("simulate", "generate a planted instance or task suite");
  add_common(simulate);
  simulate->add_option("--k", options.k, "cluster count override");

  auto* complete = app.add_subcommand("complete", "run the matrix completion solver");
  add_common(complete);
  complete->add_option("--lambda", options.lambda, "sparse-term weight override");

  auto* pipeline = app.add_subcommand("pipeline", "full clustering + few-shot evaluation run");
  add_common(pipeline);
  pipeline->add_option("--k", options.k, "cluster count override");
  pipeline->add_option("--lambda", options.lambda, "sparse-term weight override");
  pipeline->add_option("--p1", options.p1, "filter upper-margin override");
  pipeline->add_option("--p2", options.p2, "filter lower-margin override");
  pipeline->add_option("--budget", options.budget, "pair-sampling budget override");
  pipeline->add_option("--threshold", options.threshold, "fallback threshold override");

  auto* sweep = app.add_subcommand("sweep", "planted-recovery phase sweep");
  add_common(sweep);
  sweep->add_option("--k", options.k, "cluster count override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) robusttc::cmd_simulate(options);
    if (complete->parsed()) robusttc::cmd_complete(options);
    if (pipeline->parsed()) robusttc::cmd_pipeline(options);
    if (sweep->parsed()) robusttc::cmd_sweep(options);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
