// hamcouple <subcommand> --config <path> --out <dir> [--seed N] [--threads N]

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hamcouple/app.hpp"

int main(int argc, char** argv) {
  using namespace hamcouple;

  CLI::App cli{"Periodic and Neumann solutions of coupled Hamiltonian systems"};
  cli.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  cli.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool dump = false;

  const char* help[] = {
      "Minimal periods and half-periods of H1, H2 and listed Hamiltonians",
      "Resonance regime of (tau1, tau2, T)",
      "Homogeneity, decomposition, periodicity, coupling bound, Landesman-Lazer and twist checks",
      "Landesman-Lazer margins only",
      "Multistart shooting for T-periodic solutions",
      "Multistart shooting for Neumann-type solutions",
      "periods, classify, check-conditions, solve and the distinct-class count",
  };
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < subcommands().size(); ++i) {
    CLI::App* s = cli.add_subcommand(subcommands()[i], help[i]);
    s->add_option("--config", config, "Experiment file (JSON)")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out, "Output directory (default $HAMCOUPLE_OUT or hamcouple-out)");
    s->add_option("--seed", seed, "Overrides the config seed");
    s->add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
    s->add_flag("--dump-trajectories", dump, "Write trajectories/class_<k>.csv for each distinct solution");
    subs.push_back(s);
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  RunOptions opts;
  opts.out_dir = out;
  opts.threads = threads;
  opts.dump_trajectories = dump;
  for (CLI::App* s : subs) {
    if (!s->parsed()) continue;
    if (s->count("--seed")) opts.seed = seed;
    return run_config(s->get_name(), config, opts, std::cout, std::cerr);
  }
  return kExitOther;
}
