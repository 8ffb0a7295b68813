#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlvmc/features.hpp"
#include "dlvmc/sampler.hpp"
#include "dlvmc/scf.hpp"
#include "dlvmc/train.hpp"
#include "dlvmc/wavefunction.hpp"

namespace dlvmc {

/// Fully resolved run description. Serializable; the resolved form is written
/// verbatim into every run directory. Unknown keys are rejected with their
/// full path.
struct RunConfig {
  // geometry
  std::string geometry_path;    // resolved relative to the config file
  std::string geometry_inline;  // alternative to path
  LengthUnit unit = LengthUnit::Bohr;
  int charge = 0;
  std::optional<int> n_up;

  BasisKind basis = BasisKind::Sto6g;
  WfConfig wf;             // features, embedding, determinant, envelope init
  SamplerOptions sampler;
  int n_walkers = 2048;
  int burnin_steps = 500;
  TrainConfig train;
  ScfOptions scf;

  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware
  std::string output_dir = "runs";
  std::string run_name;  // empty = timestamped

  Molecule molecule() const;
  std::string resolved_json() const;  // canonical serialized form
};

/// Parse + validate a JSON config file; `overrides` are dotted key=value
/// pairs (e.g. train.lr0=1e-3) applied after the file.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

/// Parse from an in-memory JSON string (base_dir resolves geometry paths).
RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir,
                           const std::vector<std::string>& overrides);

}  // namespace dlvmc
