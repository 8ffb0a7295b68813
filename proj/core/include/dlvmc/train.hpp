#pragma once

#include <functional>
#include <vector>

#include "dlvmc/local_energy.hpp"
#include "dlvmc/sampler.hpp"
#include "dlvmc/scf.hpp"
#include "dlvmc/wavefunction.hpp"

namespace dlvmc {

struct TrainConfig {
  int n_pretrain = 1000;
  int n_opt = 2000;
  double lr0 = 1e-3;               // first-order optimizer scale
  double lr_decay_steps = 6000.0;  // lr(t) = lr0 * (1 + t/decay)^-1
  double pretrain_lr = 1e-3;
  double norm_constraint = 1.0;    // global gradient-norm cap
  double clip_window = 5.0;        // local-energy clip: median +- window*MAD
  int n_walkers = 2048;
  int eval_steps = 10000;
  int decorrelation_steps = 20;
  int eval_decorrelation_steps = 1;  // blocking handles residual correlation
  int burnin_steps = 500;
  int checkpoint_every = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

double lr_at(const TrainConfig& cfg, long t);

/// Clip to median +- window*MAD; all-equal batches pass through unchanged.
Eigen::VectorXd clip_local_energy(const Eigen::VectorXd& e, double window,
                                  double* clip_fraction = nullptr);

using GradList = std::vector<Mat>;  // aligned with param_refs order

/// Covariance estimator g = 2 mean[(E_L - mean E_L) * dlogpsi/dtheta] over the
/// batch, computed by one reverse pass per walker block.
GradList vmc_gradient(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                      const Mat& positions, int n_walkers,
                      const Eigen::VectorXd& e_clipped);

double grad_norm(const GradList& g);
/// Rescale in place when the norm exceeds the cap; returns the final norm.
double apply_norm_constraint(GradList& g, double cap);

struct AdamState {
  std::vector<Mat> m, v;
  long t = 0;
  void init_like(const std::vector<ParamRef>& refs);
  void step(std::vector<ParamRef>& refs, const GradList& g, double lr, const TrainConfig& cfg);
};

struct EnergyEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;   // blocking-corrected
  double variance = 0.0;  // mean per-sample Var(E_L)
  long n_samples = 0;
  double autocorr_time = 1.0;
};

/// Successive pair-averaging; never reports less than the naive stderr.
double blocking_stderr(const Eigen::VectorXd& series, double* autocorr_time = nullptr);

struct TrainLogRow {
  long step = 0;
  double energy_mean = 0.0;
  double energy_var = 0.0;
  double acceptance = 0.0;
  double stepsize = 0.0;
  double lr = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
};
using LogSink = std::function<void(const TrainLogRow&)>;
using CheckpointSink = std::function<void(long step, const WfParams&, const WalkerBatch&,
                                          const AdamState&)>;

/// Supervised fit of the orbital matrices to the HF orbitals over positions
/// drawn from a 50/50 mixture of psi^2 and the HF determinant density.
/// Envelope exponents stay frozen. Returns the final loss.
double pretrain(WfParams& p, const ScfResult& scf, const BasisSet& basis, const Molecule& mol,
                const FrameSet* frames, WalkerBatch& batch, const TrainConfig& cfg,
                const SamplerOptions& sopts, const LogSink& log = {});

/// Variational optimization loop. Throws NumericError on non-finite energy or
/// gradient after invoking the checkpoint sink.
void optimize(WfParams& p, const Molecule& mol, const FrameSet* frames, WalkerBatch& batch,
              const TrainConfig& cfg, const SamplerOptions& sopts, AdamState& adam,
              const LogSink& log, const CheckpointSink& checkpoint);

/// Fixed-parameter evaluation with frozen step size; parameters untouched.
EnergyEstimate evaluate(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                        WalkerBatch& batch, const TrainConfig& cfg, const SamplerOptions& sopts,
                        const LogSink& log = {});

}  // namespace dlvmc
