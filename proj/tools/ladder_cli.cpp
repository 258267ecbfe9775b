#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "ladder/app.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ladder::ValidationError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-ladder relaxation: exact quantum dynamics vs stochastic models"};
  std::string command;
  int figure = 0;
  std::string config_path, out_dir, convention;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::size_t> dense_ceiling;

  app.add_option("command", command, "Subcommand")->required()->check(CLI::IsMember(ladder::subcommand_names()));
  app.add_option("figure", figure, "Figure number for reproduce-figure (1..7)");
  app.add_option("--config", config_path, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed", seed, "Random seed (overrides seed)");
  app.add_option("--threads", threads, "Worker threads (overrides threads)");
  app.add_option("--dense-ceiling", dense_ceiling, "Largest dimension diagonalized densely");
  app.add_option("--convention", convention, "Spin operator normalization")->check(CLI::IsMember({"half", "pauli"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ladder::exit_validation;
  }

  ladder::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = ladder::parse_config(read_file(config_path));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.initial.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (dense_ceiling) cfg.dense_ceiling = *dense_ceiling;
    if (!convention.empty()) cfg.ladder.convention = ladder::parse_convention(convention);
    cfg.validate();
  } catch (const ladder::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ladder::exit_validation;
  }
  if (command == "reproduce-figure" && figure == 0) {
    std::cerr << "error: reproduce-figure needs a figure number 1..7\n";
    return ladder::exit_validation;
  }
  return ladder::run_subcommand(command, cfg, std::cout, std::cerr, figure);
}
