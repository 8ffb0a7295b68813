#pragma once

#include "dlvmc/system.hpp"
#include "dlvmc/wavefunction.hpp"

namespace dlvmc {

struct LocalEnergyParts {
  double e_kin = 0.0;
  double v_ee = 0.0;
  double v_nn = 0.0;
  double v_en = 0.0;
  double total() const { return e_kin + v_ee + v_nn + v_en; }
};

/// Gradient of log|psi| with respect to every electron coordinate, (n_el, 3).
Mat grad_log_psi(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                 const Mat& positions);

/// Sum of all 3*n_el pure second derivatives of log|psi|.
double laplacian_log_psi(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                         const Mat& positions);

/// Coulomb sums plus the log-domain kinetic identity
/// E_kin = -1/2 (lap log|psi| + |grad log|psi||^2).
/// Throws RejectedConfigurationError for particle coincidences within 1e-12.
LocalEnergyParts local_energy(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                              const Mat& positions);

struct LocalEnergyBatch {
  Eigen::VectorXd e_kin, v_ee, v_en, e_local;
  double v_nn = 0.0;
};

/// Batched local energies; walker blocks evaluate in parallel.
LocalEnergyBatch local_energy_batch(const WfParams& p, const Molecule& mol,
                                    const FrameSet* frames, const Mat& positions,
                                    int n_walkers);

/// Potential terms only (no wavefunction evaluation).
double coulomb_ee(const Molecule& mol, const Mat& positions);
double coulomb_en(const Molecule& mol, const Mat& positions);
void check_no_coincidence(const Molecule& mol, const Mat& positions);

}  // namespace dlvmc
