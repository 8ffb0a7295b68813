#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dlvmc/basis.hpp"
#include "dlvmc/system.hpp"

namespace dlvmc {

/// Boys function F0(t) = int_0^1 exp(-t u^2) du to 1e-12 absolute accuracy.
/// Throws NumericError for t < 0.
double boys_f0(double t);

/// F_0..F_{n_max}(t), downward recursion from a converged series for small t,
/// closed-form F0 plus upward recursion for large t.
void boys_sequence(int n_max, double t, double* out);

/// AO-basis one- and two-electron integrals. ERI values are stored once per
/// 8-fold-symmetry orbit, canonical index (ij) >= (kl), i >= j, k >= l.
struct IntegralTables {
  Eigen::MatrixXd s;     // overlap
  Eigen::MatrixXd t;     // kinetic
  Eigen::MatrixXd v_ne;  // nuclear attraction (negative definite-ish)
  std::vector<double> eri;
  int n_ao = 0;

  static std::size_t pair_index(int i, int j) {
    if (i < j) std::swap(i, j);
    return static_cast<std::size_t>(i) * (i + 1) / 2 + j;
  }
  double eri_at(int i, int j, int k, int l) const {
    std::size_t ij = pair_index(i, j), kl = pair_index(k, l);
    if (ij < kl) std::swap(ij, kl);
    return eri[ij * (ij + 1) / 2 + kl];
  }
};

/// Gaussian product theorem + Boys function evaluation of S, T, V_ne and ERI
/// over contracted s/p functions. Throws UnsupportedBasisError above p.
IntegralTables compute_integrals(const Molecule& mol, const BasisSet& basis);

}  // namespace dlvmc
