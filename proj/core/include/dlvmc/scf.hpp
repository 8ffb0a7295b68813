#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dlvmc/basis.hpp"
#include "dlvmc/integrals.hpp"
#include "dlvmc/system.hpp"

namespace dlvmc {

struct ScfOptions {
  int max_iter = 200;
  double density_mix = 0.5;   // fraction of the new density accepted per step
  double tol_density = 1e-8;  // max |Delta D|
  double tol_energy = 1e-10;  // |Delta E|, Ha
  double lindep_threshold = 1e-8;
};

/// Converged spin-unrestricted Hartree-Fock state in the AO basis.
struct ScfResult {
  Eigen::MatrixXd c_up, c_dn;          // AO x MO coefficient matrices
  Eigen::VectorXd eps_up, eps_dn;      // orbital energies, Ha
  Eigen::MatrixXd density;             // total D = D_up + D_dn
  Eigen::MatrixXd density_up, density_dn;
  double energy = 0.0;                 // total energy incl. nuclear repulsion, Ha
  bool converged = false;
  int iterations = 0;
  std::vector<double> energy_history;  // per accepted iterate
  int n_up = 0, n_dn = 0;
  BasisKind basis_kind = BasisKind::Sto6g;
};

/// Fixed-occupation UHF with density mixing; no DIIS. Non-convergence is
/// reported through the flag, a singular overlap throws NumericError.
ScfResult run_scf(const IntegralTables& tables, const Molecule& mol,
                  const ScfOptions& opts = {});

/// Values of all AOs at the given points: (n_points x n_ao).
Eigen::MatrixXd eval_ao(const BasisSet& basis, const Eigen::MatrixXd& points);

/// Occupied molecular orbital values at the given points, one matrix per spin
/// channel: (n_points x n_up) and (n_points x n_dn).
struct OrbitalValues {
  Eigen::MatrixXd up, dn;
};
OrbitalValues eval_orbitals(const ScfResult& scf, const BasisSet& basis,
                            const Eigen::MatrixXd& points);

/// log of the squared Slater-determinant density of the HF ground state at a
/// full electron configuration (n_el x 3). Used by pretraining mixture moves.
double hf_log_density(const ScfResult& scf, const BasisSet& basis, const Molecule& mol,
                      const Eigen::MatrixXd& electron_positions);

/// Debug dump of integral tables and the density matrix (versioned text).
void dump_integrals(const IntegralTables& tables, const ScfResult* scf,
                    const std::string& path);

}  // namespace dlvmc
