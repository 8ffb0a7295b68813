#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dlvmc/integrals.hpp"
#include "dlvmc/rng.hpp"
#include "dlvmc/system.hpp"
#include "dlvmc/wavefunction.hpp"

namespace dlvmc::testing {

// --- quadrature -------------------------------------------------------------

struct Quad1d {
  std::vector<double> x, w;
};

/// Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration.
inline Quad1d gauss_legendre(int n) {
  Quad1d q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    q.x[i] = x;
    q.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

/// Composite GL rule on [a, b]: n_sub subintervals, order-per-subinterval pts.
inline Quad1d composite_gl(double a, double b, int n_sub, int order) {
  const Quad1d base = gauss_legendre(order);
  Quad1d q;
  const double h = (b - a) / n_sub;
  for (int s = 0; s < n_sub; ++s) {
    const double lo = a + s * h;
    for (int i = 0; i < order; ++i) {
      q.x.push_back(lo + 0.5 * h * (base.x[i] + 1.0));
      q.w.push_back(0.5 * h * base.w[i]);
    }
  }
  return q;
}


/// Spherical quadrature of f(r)/|r - c| around center c; the 1/|r-c| weight
/// cancels against the Jacobian, leaving a smooth integrand.
inline double integrate_coulomb(const std::function<double(double, double, double)>& f,
                                const Eigen::Vector3d& c, double r_max, int n_r, int n_theta,
                                int n_phi) {
  const Quad1d qr = composite_gl(0.0, r_max, n_r, 8);
  const Quad1d qt = gauss_legendre(n_theta);  // cos(theta) in [-1,1]
  double total = 0.0;
  for (std::size_t ir = 0; ir < qr.x.size(); ++ir) {
    const double r = qr.x[ir];
    double shell = 0.0;
    for (int it = 0; it < n_theta; ++it) {
      const double ct = qt.x[it];
      const double st = std::sqrt(1.0 - ct * ct);
      double ring = 0.0;
      for (int ip = 0; ip < n_phi; ++ip) {
        const double phi = 2.0 * 3.14159265358979323846 * ip / n_phi;
        ring += f(c.x() + r * st * std::cos(phi), c.y() + r * st * std::sin(phi),
                  c.z() + r * ct);
      }
      shell += qt.w[it] * ring * (2.0 * 3.14159265358979323846 / n_phi);
    }
    total += qr.w[ir] * r * shell;  // r^2 dr / r = r dr
  }
  return total;
}

// --- molecules --------------------------------------------------------------

inline Molecule atom(int z, int n_up, int n_dn) {
  Molecule m;
  m.nuclei = {{Eigen::Vector3d::Zero(), z}};
  m.n_el = n_up + n_dn;
  m.n_up = n_up;
  m.n_dn = n_dn;
  m.validate();
  return m;
}

inline Molecule hydrogen() { return atom(1, 1, 0); }
inline Molecule helium() { return atom(2, 1, 1); }
inline Molecule lithium() { return atom(3, 2, 1); }
inline Molecule beryllium() { return atom(4, 2, 2); }

inline Molecule h2(double bond = 1.4) {
  Molecule m;
  m.nuclei = {{Eigen::Vector3d(0, 0, 0), 1}, {Eigen::Vector3d(0, 0, bond), 1}};
  m.n_el = 2;
  m.n_up = 1;
  m.n_dn = 1;
  m.validate();
  return m;
}

inline Molecule n2(double bond = 2.068) {
  Molecule m;
  m.nuclei = {{Eigen::Vector3d(0, 0, 0), 7}, {Eigen::Vector3d(0, 0, bond), 7}};
  m.n_el = 14;
  m.n_up = 7;
  m.n_dn = 7;
  m.validate();
  return m;
}

/// Bent three-atom chain (water geometry, bohr).
inline Molecule water() {
  Molecule m;
  m.nuclei = {{Eigen::Vector3d(0.0, 0.0, 0.0), 8},
              {Eigen::Vector3d(0.0, 1.43, 1.11), 1},
              {Eigen::Vector3d(0.0, -1.43, 1.11), 1}};
  m.n_el = 10;
  m.n_up = 5;
  m.n_dn = 5;
  m.validate();
  return m;
}

/// Asymmetric bent chain with p shells on every atom and no distance ties:
/// the generic case for frame covariance (nitrosyl-fluoride-like, bohr).
inline Molecule bent_chain() {
  Molecule m;
  m.nuclei = {{Eigen::Vector3d(0.0, 0.0, 0.0), 7},
              {Eigen::Vector3d(0.0, 0.0, 2.18), 8},
              {Eigen::Vector3d(0.0, 2.44, -0.89), 9}};
  m.n_el = 24;
  m.n_up = 12;
  m.n_dn = 12;
  m.validate();
  return m;
}

// --- random utilities -------------------------------------------------------

inline Mat random_positions(const Molecule& mol, std::uint64_t seed, std::uint64_t tag,
                            double spread = 1.2) {
  Mat r(mol.n_el, 3);
  for (int i = 0; i < mol.n_el; ++i) {
    const auto& nuc = mol.nuclei[i % mol.n_nuc()];
    for (int a = 0; a < 3; ++a)
      r(i, a) = nuc.position[a] +
                spread * rng_gaussian(seed, RngStream::Misc, tag, std::uint64_t(i), a);
  }
  return r;
}

inline Eigen::Matrix3d random_rotation(std::uint64_t seed, std::uint64_t tag) {
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a(i, j) = rng_gaussian(seed, RngStream::Misc, tag + 1000, std::uint64_t(i), j);
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(a);
  Eigen::Matrix3d q = qr.householderQ();
  if (q.determinant() < 0.0) q.col(2) = -q.col(2);
  return q;
}

/// Small network for fast tests.
inline WfConfig tiny_wf_config(FeatureMode mode = FeatureMode::LocalFrames,
                               EmbeddingVariant variant = EmbeddingVariant::Combined,
                               DetMode det = DetMode::Dense, int n_det = 2) {
  WfConfig cfg;
  cfg.n_det = n_det;
  cfg.det_mode = det;
  cfg.envelope_init = EnvelopeInit::Physical;
  cfg.features.mode = mode;
  cfg.embedding.variant = variant;
  cfg.embedding.iterations = 2;
  cfg.embedding.width_one = 24;
  cfg.embedding.width_aux = 8;
  cfg.embedding.z_emb_dim = 8;
  return cfg;
}

/// Independent closed-shell RHF loop over precomputed integral tables (plain
/// Roothaan iterations, restricted formalism, no damping): a second route to
/// the SCF total energy.
inline double oracle_rhf_energy(const IntegralTables& tab, const Molecule& mol) {
  if (mol.n_up != mol.n_dn) throw std::invalid_argument("oracle_rhf_energy: closed shells only");
  const int n = tab.n_ao;
  const int nocc = mol.n_up;
  Eigen::SelfAdjointEigenSolver<Mat> es(tab.s);
  Mat x = es.eigenvectors();
  for (int i = 0; i < n; ++i) x.col(i) /= std::sqrt(es.eigenvalues()[i]);
  const Mat h = tab.t + tab.v_ne;

  Mat f = h;
  double e_prev = 0.0;
  for (int it = 0; it < 300; ++it) {
    Eigen::SelfAdjointEigenSolver<Mat> fe(x.transpose() * f * x);
    const Mat c = x * fe.eigenvectors();
    const Mat d = 2.0 * c.leftCols(nocc) * c.leftCols(nocc).transpose();
    Mat g = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            g(i, j) += d(k, l) * (tab.eri_at(i, j, k, l) - 0.5 * tab.eri_at(i, l, k, j));
    f = h + g;
    const double e = 0.5 * (d.array() * (h + f).array()).sum() + mol.nuclear_repulsion();
    if (std::abs(e - e_prev) < 1e-12 && it > 3) return e;
    e_prev = e;
  }
  return e_prev;
}

/// Parameters that collapse a one-electron ansatz to exp(-omega r): zero
/// affine weights with unit biases make the embedding constant, so
/// psi = (W . h^L) * exp(-omega |rho|) exactly.
inline WfParams hydrogenic_params(const Molecule& mol, double omega) {
  WfConfig cfg =
      tiny_wf_config(FeatureMode::RawDiffs, EmbeddingVariant::Combined, DetMode::Dense, 1);
  WfParams p = init_params(cfg, mol, 1);
  for (auto& it : p.embedding.iters) {
    for (AffineParams* a : {&it.a_one, &it.a_same, &it.a_diff, &it.a_nuc, &it.b_same,
                            &it.b_diff, &it.b_nuc, &it.c_same, &it.c_diff, &it.c_nuc}) {
      if (a->empty()) continue;
      a->w.setZero();
      a->b.setOnes();
    }
  }
  for (int s = 0; s < 2; ++s) {
    p.w_orb[s].setOnes();
    p.env_pi[s].setOnes();
    p.env_omega[s].setConstant(omega);
  }
  return p;
}

}  // namespace dlvmc::testing
