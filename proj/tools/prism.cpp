#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prism/commands.hpp"

namespace {

std::optional<std::filesystem::path> opt_path(const std::string &s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"prism: orthogonal meta-embedding toolkit"};
  app.require_subcommand(1);

  std::string config, out, params, split = "test", facet;
  std::vector<std::uint64_t> seeds;
  std::size_t sample = 500;

  auto *train = app.add_subcommand("train", "train a meta-embedding model and export its table");
  train->add_option("--config", config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory (default: config output_dir)");

  auto *exp = app.add_subcommand("export", "write the precomputed meta-embedding table");
  exp->add_option("--params", params, "params.bin from a training run")->required()->check(CLI::ExistingFile);
  exp->add_option("--config", config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "output .vec path")->required();

  auto *eval = app.add_subcommand("eval", "evaluate trained parameters on a split");
  eval->add_option("--params", params, "params.bin")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--out", out, "directory for eval.json");

  auto *analyze = app.add_subcommand("analyze", "facet separability: k-means + AMI over transformed facets");
  analyze->add_option("--params", params, "params.bin")->required()->check(CLI::ExistingFile);
  analyze->add_option("--config", config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  analyze->add_option("--seeds", seeds, "k-means seeds (default: 5 derived from the config seed)")->delimiter(',');
  analyze->add_option("--sample", sample, "tokens sampled per facet")->check(CLI::PositiveNumber);
  analyze->add_option("--out", out, "directory for separability.csv and points.csv");

  auto *inspect = app.add_subcommand("inspect", "validate a facet file and print summary statistics");
  inspect->add_option("facet", facet, "embedding text file")->required()->check(CLI::ExistingFile);

  auto *generate = app.add_subcommand("generate", "write a synthetic config's facets and splits to disk");
  generate->add_option("--config", config, "run config with a 'synthetic' section")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return prism::cmd_train(config, opt_path(out), std::cout, std::cerr);
  if (exp->parsed()) return prism::cmd_export(params, config, out, std::cout, std::cerr);
  if (eval->parsed()) return prism::cmd_eval(params, config, split, opt_path(out), std::cout, std::cerr);
  if (analyze->parsed()) return prism::cmd_analyze(params, config, seeds, sample, opt_path(out), std::cout, std::cerr);
  if (inspect->parsed()) return prism::cmd_inspect(facet, std::cout, std::cerr);
  if (generate->parsed()) return prism::cmd_generate(config, out, std::cout, std::cerr);
  return 1;
}
