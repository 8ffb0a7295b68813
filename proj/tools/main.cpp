#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlvmc/errors.hpp"
#include "dlvmc/report.hpp"
#include "dlvmc/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* opt = cmd->add_option("config", args.config_path, "run configuration (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--set", args.overrides,
                  "dotted config override, e.g. --set train.lr0=1e-3");
  cmd->add_option("--run-dir", args.run_dir, "fixed run directory (default: timestamped)");
}

std::string resolve_run_dir(const dlvmc::RunConfig& cfg, const CommonArgs& args) {
  if (args.run_dir.empty()) return dlvmc::make_run_dir(cfg);
  std::filesystem::create_directories(args.run_dir);
  std::ofstream out(std::filesystem::path(args.run_dir) / "config.json");
  out << cfg.resolved_json();
  return args.run_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep-learning variational Monte Carlo for small molecules"};
  app.require_subcommand(1);

  CommonArgs scf_args, frames_args, pre_args, train_args, eval_args, ablate_args;
  std::string dump_integrals_path, dump_frames_path, checkpoint_path;
  std::string ablate_preset = "waterfall-lite", ablate_out = "ablation";
  std::vector<std::string> report_dirs;
  std::string report_out = "report";

  auto* scf_cmd = app.add_subcommand("scf", "run the Hartree-Fock reference");
  add_common(scf_cmd, scf_args);
  scf_cmd->add_option("--dump-integrals", dump_integrals_path,
                      "write S/T/V/ERI tables and the density matrix to a file");

  auto* frames_cmd = app.add_subcommand("frames", "compute per-nucleus local frames");
  add_common(frames_cmd, frames_args);
  frames_cmd->add_option("--dump-frames", dump_frames_path, "write frames to a file");

  auto* pre_cmd = app.add_subcommand("pretrain", "supervised pretraining only");
  add_common(pre_cmd, pre_args);

  auto* train_cmd = app.add_subcommand("train", "pretrain, optimize and evaluate");
  add_common(train_cmd, train_args);

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a trained checkpoint");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "run an architecture-ablation matrix");
  add_common(ablate_cmd, ablate_args);
  ablate_cmd->add_option("--preset", ablate_preset, "ablation preset (waterfall-lite)");
  ablate_cmd->add_option("--out", ablate_out, "output directory for all cells");

  auto* report_cmd = app.add_subcommand("report", "merge run directories into a report");
  report_cmd->add_option("dirs", report_dirs, "run directories")->required();
  report_cmd->add_option("--out", report_out, "report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (scf_cmd->parsed()) {
      const auto cfg = dlvmc::load_run_config(scf_args.config_path, scf_args.overrides);
      dlvmc::run_scf_cmd(cfg, dump_integrals_path);
    } else if (frames_cmd->parsed()) {
      const auto cfg = dlvmc::load_run_config(frames_args.config_path, frames_args.overrides);
      dlvmc::run_frames_cmd(cfg, dump_frames_path);
    } else if (pre_cmd->parsed()) {
      const auto cfg = dlvmc::load_run_config(pre_args.config_path, pre_args.overrides);
      const auto res = dlvmc::run_pretrain(cfg, resolve_run_dir(cfg, pre_args));
      std::cout << "pretrain: final loss " << res.final_pretrain_loss << "\n";
    } else if (train_cmd->parsed()) {
      const auto cfg = dlvmc::load_run_config(train_args.config_path, train_args.overrides);
      const auto res = dlvmc::run_train(cfg, resolve_run_dir(cfg, train_args));
      std::cout.precision(9);
      std::cout << "energy: " << res.energy.mean << " +- " << res.energy.stderr_ << " Ha ("
                << res.run_dir << ")\n";
    } else if (eval_cmd->parsed()) {
      const auto cfg = dlvmc::load_run_config(eval_args.config_path, eval_args.overrides);
      const auto res = dlvmc::run_evaluate(cfg, checkpoint_path, resolve_run_dir(cfg, eval_args));
      std::cout.precision(9);
      std::cout << "energy: " << res.energy.mean << " +- " << res.energy.stderr_ << " Ha\n";
    } else if (ablate_cmd->parsed()) {
      const auto cfg = dlvmc::load_run_config(ablate_args.config_path, ablate_args.overrides);
      dlvmc::run_ablate(cfg, ablate_preset, ablate_out);
    } else if (report_cmd->parsed()) {
      dlvmc::write_report(report_dirs, report_out);
    }
  } catch (const dlvmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dlvmc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
