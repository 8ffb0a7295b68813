#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlvmc/run_config.hpp"
#include "dlvmc/train.hpp"

namespace dlvmc {

/// Everything a run needs: molecule, and (when required) basis/SCF/frames.
struct SystemBundle {
  Molecule mol;
  std::optional<BasisSet> basis;
  std::optional<ScfResult> scf;
  std::optional<FrameSet> frames;

  const FrameSet* frames_ptr() const { return frames ? &*frames : nullptr; }
};

/// Build the molecule plus SCF/frames as demanded by the config
/// (local-frame features or pretraining force the SCF).
SystemBundle prepare_system(const RunConfig& cfg, bool need_scf);

/// Create (and return) the run directory: output_dir/run_name or a
/// timestamped name. The resolved config is written into it immediately.
std::string make_run_dir(const RunConfig& cfg, const std::string& suffix = "");

struct RunResult {
  std::string run_dir;
  EnergyEstimate energy;
  double final_pretrain_loss = 0.0;
};

/// Full pipeline: init -> burn-in -> pretrain -> burn-in -> optimize ->
/// evaluate. Artifacts: config.json, pretrain.csv, log.csv, eval.csv,
/// checkpoint.bin, energy.json.
RunResult run_train(const RunConfig& cfg, const std::string& run_dir);

/// Evaluation only; requires a checkpoint produced by run_train/pretrain.
RunResult run_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                       const std::string& run_dir);

/// Pretraining only; saves a checkpoint and returns the final loss.
RunResult run_pretrain(const RunConfig& cfg, const std::string& run_dir);

/// SCF subcommand: returns total energy; optional integral dump.
double run_scf_cmd(const RunConfig& cfg, const std::string& dump_path);

/// Frames subcommand: prints frames; optional dump file.
void run_frames_cmd(const RunConfig& cfg, const std::string& dump_path);

struct AblationCell {
  std::string system;    // preset system label
  std::string cell;      // axis label ("full", "block_det", ...)
  std::string geometry;  // inline XYZ, bohr
  RunConfig cfg;
};

/// Expand an ablation preset over the architecture axes
/// (determinant mode, embedding variant, feature mode, envelope init).
std::vector<AblationCell> expand_ablation(const RunConfig& base, const std::string& preset);

/// Run every cell sequentially with shared seeds; emits a summary report.
std::vector<RunResult> run_ablate(const RunConfig& base, const std::string& preset,
                                  const std::string& out_dir);

/// Write energy.json for an estimate.
void write_energy_json(const std::string& path, const EnergyEstimate& e,
                       const std::string& system_label);

}  // namespace dlvmc
