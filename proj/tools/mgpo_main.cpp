#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "mgpo/config.hpp"
#include "mgpo/runner.hpp"

using namespace mgpo;

int main(int argc, char** argv) {
  CLI::App app{"LoRA training harness: momentum-guided perturbation optimization and baselines"};
  app.require_subcommand(1);

  int jobs = 1;
  bool plot = true;
  bool resume = false;
  std::optional<std::uint64_t> seed_override;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--jobs", jobs, "max parallel seed workers")->check(CLI::PositiveNumber);
    cmd->add_flag("--plot,!--no-plot", plot, "write SVG plots");
    cmd->add_option("--seed-override", seed_override, "run a single seed instead of run.seeds");
  };

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "execute one experiment config");
  run_cmd->add_option("config", config_path, "config file")->required();
  run_cmd->add_flag("--resume", resume, "continue from checkpoint.txt in each seed directory");
  add_common(run_cmd);

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "tabulate and plot completed runs");
  compare_cmd->add_option("dirs", compare_dirs, "run output directories")->expected(-2);
  compare_cmd->add_option("-o,--output", compare_out, "output directory")->required();
  compare_cmd->add_flag("--plot,!--no-plot", plot, "write SVG plots");

  std::string sweep_axis;
  std::vector<double> sweep_values;
  auto* sweep_cmd = app.add_subcommand("sweep", "run the config across rank or lr values");
  sweep_cmd->add_option("config", config_path, "config file")->required();
  sweep_cmd->add_option("--axis", sweep_axis, "rank or lr")->required();
  sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->expected(-1);
  add_common(sweep_cmd);

  std::string preset_name, preset_out;
  auto* preset_cmd = app.add_subcommand("preset", "print a shipped preset config");
  preset_cmd->add_option("name", preset_name, "preset name (or 'list')")->required();
  preset_cmd->add_option("-o,--output", preset_out, "write to file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    RunOptions opts{jobs, plot, resume, seed_override};
    if (run_cmd->parsed() || sweep_cmd->parsed()) {
      ExperimentConfig cfg;
      try {
        cfg = parse_config(config_path);
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
      }
      return run_cmd->parsed() ? cmd_run(cfg, opts) : cmd_sweep(cfg, sweep_axis, sweep_values, opts);
    }
    if (compare_cmd->parsed()) {
      return cmd_compare(compare_dirs, compare_out, plot);
    }
    if (preset_cmd->parsed()) {
      if (preset_name == "list") {
        for (const std::string& n : preset_names()) std::cout << n << "\n";
        return kExitOk;
      }
      const std::string text = preset_text(preset_name);
      if (preset_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(preset_out);
        if (!out) {
          std::cerr << "cannot open " << preset_out << "\n";
          return kExitIoError;
        }
        out << text;
      }
      return kExitOk;
    }
  } catch (const FormatError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  }
  return kExitOk;
}
