#pragma once

#include <functional>

#include "dlvmc/frames.hpp"
#include "dlvmc/system.hpp"
#include "dlvmc/wavefunction.hpp"

namespace dlvmc {

/// log|psi| of a batch plus validity flags (0 where the target vanishes).
struct TargetEval {
  Eigen::VectorXd log_abs;
  Eigen::VectorXd ok;
};

/// Sampling target; must be pure and callable from several threads at once.
using LogAbsTarget = std::function<TargetEval(const Mat& positions, int n_walkers)>;

/// |psi|^2 target for a wavefunction.
LogAbsTarget wavefunction_target(const WfParams& p, const Molecule& mol,
                                 const FrameSet* frames);

enum class MoveMode { AllElectron, OneElectron };

struct SamplerOptions {
  double initial_stepsize = 0.5;  // bohr
  double adapt_kappa = 0.02;
  double target_acceptance = 0.5;
  double stepsize_min = 1e-4;
  double stepsize_max = 10.0;
  double acceptance_ema_decay = 0.9;
  MoveMode move_mode = MoveMode::AllElectron;
};

/// Markov-chain state. Proposal/acceptance draws are pure functions of
/// (seed, mc_step, walker, ...), so trajectories are identical under any
/// thread count.
struct WalkerBatch {
  Mat positions;               // (n_walkers * n_el, 3)
  Eigen::VectorXd log_abs;     // cached target log|psi| per walker
  Eigen::VectorXd sign;        // cached validity (0 = invalid)
  double stepsize = 0.5;
  double acceptance_ema = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t mc_step = 0;
  int n_walkers = 0;
  int n_el = 0;

  Eigen::Block<Mat> walker(int w) { return positions.middleRows(Eigen::Index(w) * n_el, n_el); }
};

/// Electrons are placed around nuclei proportionally to Z with a
/// spin-balanced round-robin, plus unit Gaussian noise.
WalkerBatch init_walkers(const Molecule& mol, int n_walkers, std::uint64_t seed,
                         const LogAbsTarget& target, const SamplerOptions& opts = {});

/// One Metropolis-Hastings sweep with symmetric Gaussian proposals.
/// Proposals landing within 1e-12 bohr of a nucleus or on vanishing targets
/// are rejected outright. Updates caches on acceptance and the acceptance EMA.
void mh_step(WalkerBatch& batch, const LogAbsTarget& target, const Molecule& mol,
             const SamplerOptions& opts);

/// Multiplicative step-size control toward the target acceptance.
void adapt_stepsize(WalkerBatch& batch, const SamplerOptions& opts);

/// n_steps >= 1 MH sweeps; optional step-size adaptation after each sweep.
void decorrelate(WalkerBatch& batch, const LogAbsTarget& target, const Molecule& mol,
                 int n_steps, const SamplerOptions& opts, bool adapt);

/// min(1, exp(2*(log'|psi| - log|psi|))).
double acceptance_probability(double log_abs_new, double log_abs_old);

}  // namespace dlvmc
