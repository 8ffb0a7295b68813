#pragma once

#include <string>

#include "dlvmc/sampler.hpp"
#include "dlvmc/train.hpp"
#include "dlvmc/wavefunction.hpp"

namespace dlvmc {

/// Versioned binary container of named arrays: parameters, optimizer moments,
/// walker state, RNG counters and the step counter. Round trips bit-exactly.
void save_checkpoint(const std::string& path, WfParams& params, const WalkerBatch& batch,
                     const AdamState& adam, long opt_step);

struct CheckpointData {
  WalkerBatch batch;
  AdamState adam;
  long opt_step = 0;
};

/// Loads into existing params (shapes must match). Returns walker/optimizer
/// state; throws ParseError on malformed files, ConfigError on mismatches.
CheckpointData load_checkpoint(const std::string& path, WfParams& params);

}  // namespace dlvmc
