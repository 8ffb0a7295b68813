#include "dlvmc/frames.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <limits>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

constexpr double kPerpendicularEps = 1e-8;

int nearest_neighbor(const Molecule& mol, int j) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mol.n_nuc(); ++k) {
    if (k == j) continue;
    const double d = (mol.nuclei[k].position - mol.nuclei[j].position).norm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

// Re-orient the degenerate (i, i+1) column pair of u in-plane to maximize
// u.col(i).dot(ref.col(i)) + u.col(i+1).dot(ref.col(i+1)). The search covers
// the full O(2) ambiguity of the eigenpair (rotations and the reflection), so
// the result does not depend on the eigensolver's arbitrary in-plane choice.
void align_degenerate_pair(Eigen::Matrix3d& u, int i, const Eigen::Matrix3d& ref) {
  const Eigen::Vector3d a0 = ref.col(i), a1 = ref.col(i + 1);
  Eigen::Vector3d e0 = u.col(i), e1 = u.col(i + 1);
  const double b_rot = e0.dot(a0) + e1.dot(a1);
  const double c_rot = e1.dot(a0) - e0.dot(a1);
  const double b_ref = e0.dot(a0) - e1.dot(a1);
  const double c_ref = -e1.dot(a0) - e0.dot(a1);
  if (std::hypot(b_ref, c_ref) > std::hypot(b_rot, c_rot)) e1 = -e1;
  const double b = e0.dot(a0) + e1.dot(a1);
  const double c = e1.dot(a0) - e0.dot(a1);
  if (std::abs(b) < 1e-300 && std::abs(c) < 1e-300) return;
  const double phi = std::atan2(c, b);
  u.col(i) = std::cos(phi) * e0 + std::sin(phi) * e1;
  u.col(i + 1) = -std::sin(phi) * e0 + std::cos(phi) * e1;
}

}  // namespace

FrameSet FrameSet::identity(int n_nuc) {
  FrameSet fs;
  fs.u.assign(n_nuc, Eigen::Matrix3d::Identity());
  fs.eigenvalues.assign(n_nuc, Eigen::Vector3d::Zero());
  fs.degenerate.assign(n_nuc, false);
  return fs;
}

int BasisSet::p_shell_start(int nucleus) const {
  int found = -1;
  for (int i = 0; i + 2 < n_ao(); ++i) {
    const auto& f = functions[i];
    if (f.nucleus != nucleus) continue;
    if (f.lx == 1 && f.ly == 0 && f.lz == 0 && functions[i + 1].nucleus == nucleus &&
        functions[i + 1].ly == 1 && functions[i + 2].nucleus == nucleus &&
        functions[i + 2].lz == 1) {
      if (found >= 0)
        throw UnsupportedBasisError("p_shell_start: nucleus has multiple p shells");
      found = i;
    }
  }
  return found;
}

bool p_block(const ScfResult& scf, const BasisSet& basis, int nucleus, Eigen::Matrix3d* block) {
  const int start = basis.p_shell_start(nucleus);
  if (start < 0) return false;
  *block = scf.density.block<3, 3>(start, start);
  // symmetrize away float round-off from the D = C C^T products
  *block = 0.5 * (*block + block->transpose());
  return true;
}

FrameSet compute_frames(const ScfResult& scf, const BasisSet& basis, const Molecule& mol,
                        double tol_degenerate) {
  if (!scf.converged) throw NumericError("compute_frames: SCF not converged");
  const int n = mol.n_nuc();
  FrameSet fs = FrameSet::identity(n);
  if (n == 1) return fs;  // single-atom convention

  std::vector<bool> framed(n, false);
  Eigen::Matrix3d prev_axes = Eigen::Matrix3d::Identity();  // global axes before any frame
  bool have_prev = false;

  for (int j = 0; j < n; ++j) {
    Eigen::Matrix3d d;
    if (!p_block(scf, basis, j, &d)) continue;  // fallback pass below

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(d);
    Eigen::Matrix3d u;
    Eigen::Vector3d vals;
    for (int c = 0; c < 3; ++c) {  // ascending -> descending
      u.col(c) = es.eigenvectors().col(2 - c);
      vals[c] = es.eigenvalues()[2 - c];
    }
    fs.eigenvalues[j] = vals;

    const Eigen::Matrix3d ref = have_prev ? prev_axes : Eigen::Matrix3d::Identity();
    const bool deg01 = vals[0] - vals[1] < tol_degenerate;
    const bool deg12 = vals[1] - vals[2] < tol_degenerate;
    fs.degenerate[j] = deg01 || deg12;

    if (deg01 && deg12) {
      // fully degenerate block carries no direction at all
      u = ref;
    } else {
      bool pair_fixed[3] = {false, false, false};
      if (deg01) {
        align_degenerate_pair(u, 0, ref);
        pair_fixed[0] = pair_fixed[1] = true;
      } else if (deg12) {
        align_degenerate_pair(u, 1, ref);
        pair_fixed[1] = pair_fixed[2] = true;
      }

      // geometric sign fixing for the remaining axes
      const int nb = nearest_neighbor(mol, j);
      const Eigen::Vector3d d1 =
          (mol.nuclei[nb].position - mol.nuclei[j].position).normalized();
      int deferred = -1;
      for (int c = 0; c < 3; ++c) {
        if (pair_fixed[c]) continue;
        const double proj = u.col(c).dot(d1);
        if (std::abs(proj) > kPerpendicularEps) {
          if (proj < 0.0) u.col(c) = -u.col(c);
        } else if (deferred < 0) {
          deferred = c;
        } else {
          // second perpendicular axis: deterministic non-geometric fallback
          int imax;
          u.col(c).cwiseAbs().maxCoeff(&imax);
          if (u(imax, c) < 0.0) u.col(c) = -u.col(c);
        }
      }
      if (deferred >= 0 && u.determinant() < 0.0) u.col(deferred) = -u.col(deferred);
    }

    if (u.determinant() < 0.0) u.col(2) = -u.col(2);  // right-handed frame
    fs.u[j] = u;
    framed[j] = true;
    prev_axes = u;
    have_prev = true;
  }

  // nuclei without a p shell adopt the nearest framed nucleus's system
  for (int j = 0; j < n; ++j) {
    if (framed[j]) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (!framed[k]) continue;
      const double d = (mol.nuclei[k].position - mol.nuclei[j].position).norm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best >= 0) {
      fs.u[j] = fs.u[best];
      fs.eigenvalues[j] = fs.eigenvalues[best];
    }  // else: no framed nucleus anywhere, keep identity
  }
  return fs;
}

void dump_frames(const FrameSet& frames, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("dump_frames: cannot open " + path);
  out.precision(17);
  out << "dlvmc-frames v1\n";
  for (int j = 0; j < frames.n_nuc(); ++j) {
    out << "nucleus " << j << "\n";
    out << "eigenvalues " << frames.eigenvalues[j].transpose() << "\n";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << frames.u[j](r, c) << (c == 2 ? "" : " ");
      out << "\n";
    }
  }
}

}  // namespace dlvmc
