#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dlvmc/system.hpp"

namespace dlvmc {

enum class BasisKind { Sto6g, Sto3g };

/// One contracted shell of Cartesian Gaussians sharing an angular momentum.
/// Coefficients refer to normalized primitives; the contraction itself is
/// rescaled so that every component has unit self-overlap.
struct GaussianShell {
  int l = 0;                      // 0 = s, 1 = p
  std::vector<double> exponents;  // primitive exponents, bohr^-2
  std::vector<double> coeffs;     // contraction coefficients (normalized primitives)
};

struct AtomBasis {
  int z = 0;
  std::vector<GaussianShell> shells;
};

/// One Cartesian AO: a contracted shell component centered on a nucleus.
struct BasisFunction {
  Eigen::Vector3d center;
  int lx = 0, ly = 0, lz = 0;
  std::vector<double> exponents;
  std::vector<double> coeffs;  // includes primitive norms and contraction rescaling
  int nucleus = 0;             // owning nucleus index
  int l() const { return lx + ly + lz; }
};

/// Minimal Gaussian basis for a molecule. AO order: nuclei in molecule order,
/// shells in (1s,2s,2p,...) order, p components in (x,y,z) order.
struct BasisSet {
  std::vector<BasisFunction> functions;
  BasisKind kind = BasisKind::Sto6g;
  int n_ao() const { return static_cast<int>(functions.size()); }
  /// Index of the (px,py,pz) AO triple of nucleus J, or -1 if it has no p
  /// shell. Throws UnsupportedBasisError if the nucleus carries more than one
  /// p shell (frames would have to choose).
  int p_shell_start(int nucleus) const;
};

/// Slater-rule effective exponent for shell (n, l) of element Z, with
/// s and p of a given n sharing one group. Unoccupied valence p shells
/// inherit the exponent of the ns shell.
double slater_zeta(int z, int n, int l);

/// Per-element contracted-shell table for the embedded minimal basis.
/// Includes every shell occupied in the ground configuration plus the valence
/// p shell. Throws UnsupportedBasisError for elements needing d shells (Z>20).
AtomBasis atom_basis(int z, BasisKind kind);

/// Assemble the AO basis for a molecule with primitive-norm folding.
BasisSet build_basis(const Molecule& mol, BasisKind kind);

BasisKind basis_kind_from_string(const std::string& s);
std::string to_string(BasisKind kind);

/// Self-overlap of one contracted AO (used by normalization tests).
double ao_self_overlap(const BasisFunction& f);

}  // namespace dlvmc
