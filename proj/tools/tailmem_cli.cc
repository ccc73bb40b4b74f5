// Command-line driver. Exit codes: 0 success, 1 invalid input or
// configuration, 2 runtime failure.
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tailmem/config.h"
#include "tailmem/pipeline.h"

namespace {

struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;

  tailmem::RunConfig Load() const {
    std::vector<std::string> all = overrides;
    if (!output_dir.empty()) all.push_back("run.output_dir=" + output_dir);
    return tailmem::LoadConfig(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path),
                               all);
  }
};

void AddConfigFlags(CLI::App* cmd, ConfigFlags& flags, const std::string& suffix = "") {
  cmd->add_option("--config" + suffix, flags.config_path, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set" + suffix, flags.overrides, "override, section.key=value (repeatable)");
  cmd->add_option("--out" + suffix, flags.output_dir, "output directory (run.output_dir)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subsampled memorization and influence estimation"};
  app.require_subcommand(1);

  ConfigFlags flags;
  ConfigFlags other;
  const auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    AddConfigFlags(cmd, flags);
    return cmd;
  };
  CLI::App* gen = add("gen", "write the synthetic dataset and its ground truth");
  CLI::App* trials = add("trials", "run or extend the trial store");
  CLI::App* estimate = add("estimate", "memorization and influence tables from the store");
  CLI::App* select = add("select", "high-influence pairs, their statistics and representative picks");
  CLI::App* oracle = add("oracle", "compare estimates with exact enumeration (small n)");
  CLI::App* removal = add("removal", "accuracy after removing memorized vs random examples");
  CLI::App* marginal = add("marginal", "marginal utility of the high-influence pairs");
  CLI::App* consistency = add("consistency", "agreement between this run and a second run (--config-b ...)");
  AddConfigFlags(consistency, other, "-b");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const tailmem::RunConfig config = flags.Load();
    if (gen->parsed()) tailmem::CmdGen(config);
    if (trials->parsed()) std::cerr << tailmem::CmdTrials(config) << "\n";
    if (estimate->parsed()) tailmem::CmdEstimate(config);
    if (select->parsed()) tailmem::CmdSelect(config);
    if (oracle->parsed()) tailmem::CmdOracle(config);
    if (removal->parsed()) tailmem::CmdRemoval(config);
    if (marginal->parsed()) tailmem::CmdMarginal(config);
    if (consistency->parsed()) tailmem::CmdConsistency(config, other.Load());
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
