#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dlvmc/basis.hpp"
#include "dlvmc/scf.hpp"
#include "dlvmc/system.hpp"

namespace dlvmc {

/// Per-nucleus local coordinate systems. Columns of u[J] are the sorted
/// p-block eigenvectors (descending eigenvalue); u[J] is orthogonal with
/// det +1. Feature building applies u[J]^T to electron-nucleus differences.
struct FrameSet {
  std::vector<Eigen::Matrix3d> u;
  std::vector<Eigen::Vector3d> eigenvalues;  // sorted descending; zero for fallback frames
  std::vector<bool> degenerate;              // top-adjacent pair within tolerance

  int n_nuc() const { return static_cast<int>(u.size()); }
  static FrameSet identity(int n_nuc);
};

/// 3x3 symmetric block of the total density matrix over (px,py,pz) of
/// nucleus J. Returns false if the nucleus carries no p shell.
bool p_block(const ScfResult& scf, const BasisSet& basis, int nucleus,
             Eigen::Matrix3d* block);

/// Eigen-decompose every p-block, sort eigenvectors by descending eigenvalue,
/// fix signs by projection onto the nearest-neighbor direction (right-handed
/// completion for axes perpendicular to the geometry), and resolve degenerate
/// adjacent pairs by maximizing signed overlap with the previous nucleus's
/// axes. Single atoms get the identity frame; nuclei without a p shell copy
/// the nearest framed nucleus. Throws NumericError if scf did not converge.
FrameSet compute_frames(const ScfResult& scf, const BasisSet& basis, const Molecule& mol,
                        double tol_degenerate = 1e-6);

/// Plain-text frame dump: per nucleus 3 eigenvalues + 9 matrix entries.
void dump_frames(const FrameSet& frames, const std::string& path);

}  // namespace dlvmc
