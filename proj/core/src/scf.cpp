#include "dlvmc/scf.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

// Canonical orthogonalization X = U diag(1/sqrt(lambda)) with small overlap
// eigenvalues discarded.
Eigen::MatrixXd orthogonalizer(const Eigen::MatrixXd& s, double threshold) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const auto& vals = es.eigenvalues();
  int kept = 0;
  for (int i = 0; i < vals.size(); ++i)
    if (vals[i] > threshold) ++kept;
  if (kept == 0) throw NumericError("run_scf: overlap matrix numerically singular");
  Eigen::MatrixXd x(s.rows(), kept);
  int col = 0;
  for (int i = 0; i < vals.size(); ++i) {
    if (vals[i] <= threshold) continue;
    x.col(col++) = es.eigenvectors().col(i) / std::sqrt(vals[i]);
  }
  return x;
}

// G[sigma] = J(D_total) - K(D_sigma) from the packed ERI list.
Eigen::MatrixXd build_g(const IntegralTables& tab, const Eigen::MatrixXd& d_total,
                        const Eigen::MatrixXd& d_spin) {
  const int n = tab.n_ao;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double coul = 0.0, exch = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          coul += d_total(k, l) * tab.eri_at(i, j, k, l);
          exch += d_spin(k, l) * tab.eri_at(i, l, k, j);
        }
      g(i, j) = coul - exch;
    }
  return g;
}

struct SpinChannel {
  Eigen::MatrixXd c;      // AO x MO, orthonormal w.r.t. S
  Eigen::VectorXd eps;
  Eigen::MatrixXd density(int n_occ) const {
    if (n_occ == 0) return Eigen::MatrixXd::Zero(c.rows(), c.rows());
    return c.leftCols(n_occ) * c.leftCols(n_occ).transpose();
  }
};

SpinChannel solve_fock(const Eigen::MatrixXd& f, const Eigen::MatrixXd& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * f * x);
  SpinChannel ch;
  ch.c = x * es.eigenvectors();
  ch.eps = es.eigenvalues();
  return ch;
}

double electronic_energy(const IntegralTables& tab, const Eigen::MatrixXd& d_up,
                         const Eigen::MatrixXd& d_dn, const Eigen::MatrixXd& g_up,
                         const Eigen::MatrixXd& g_dn) {
  const Eigen::MatrixXd h = tab.t + tab.v_ne;
  const Eigen::MatrixXd d_total = d_up + d_dn;
  double e = (d_total.array() * h.array()).sum();
  e += 0.5 * (d_up.array() * g_up.array()).sum();
  e += 0.5 * (d_dn.array() * g_dn.array()).sum();
  return e;
}

}  // namespace

ScfResult run_scf(const IntegralTables& tab, const Molecule& mol, const ScfOptions& opts) {
  const int n = tab.n_ao;
  if (mol.n_up > n || mol.n_dn > n)
    throw ConfigError("run_scf: fewer basis functions than occupied orbitals");

  const Eigen::MatrixXd x = orthogonalizer(tab.s, opts.lindep_threshold);
  const Eigen::MatrixXd h_core = tab.t + tab.v_ne;

  // core guess
  SpinChannel up = solve_fock(h_core, x);
  SpinChannel dn = up;
  Eigen::MatrixXd d_up = up.density(mol.n_up);
  Eigen::MatrixXd d_dn = dn.density(mol.n_dn);

  ScfResult res;
  res.n_up = mol.n_up;
  res.n_dn = mol.n_dn;
  const double e_nuc = mol.nuclear_repulsion();

  double e_prev = 0.0;
  {
    const Eigen::MatrixXd g_up = build_g(tab, d_up + d_dn, d_up);
    const Eigen::MatrixXd g_dn = build_g(tab, d_up + d_dn, d_dn);
    e_prev = electronic_energy(tab, d_up, d_dn, g_up, g_dn) + e_nuc;
  }
  res.energy_history.push_back(e_prev);

  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::MatrixXd d_total = d_up + d_dn;
    const Eigen::MatrixXd f_up = h_core + build_g(tab, d_total, d_up);
    const Eigen::MatrixXd f_dn = h_core + build_g(tab, d_total, d_dn);
    up = solve_fock(f_up, x);
    dn = solve_fock(f_dn, x);

    const Eigen::MatrixXd d_up_new =
        (1.0 - opts.density_mix) * d_up + opts.density_mix * up.density(mol.n_up);
    const Eigen::MatrixXd d_dn_new =
        (1.0 - opts.density_mix) * d_dn + opts.density_mix * dn.density(mol.n_dn);

    const double delta_d = std::max((d_up_new - d_up).cwiseAbs().maxCoeff(),
                                    (d_dn_new - d_dn).cwiseAbs().maxCoeff());
    d_up = d_up_new;
    d_dn = d_dn_new;

    const Eigen::MatrixXd g_up = build_g(tab, d_up + d_dn, d_up);
    const Eigen::MatrixXd g_dn = build_g(tab, d_up + d_dn, d_dn);
    const double e = electronic_energy(tab, d_up, d_dn, g_up, g_dn) + e_nuc;
    res.energy_history.push_back(e);
    res.iterations = it + 1;

    if (delta_d < opts.tol_density && std::abs(e - e_prev) < opts.tol_energy) {
      res.converged = true;
      e_prev = e;
      break;
    }
    e_prev = e;
  }

  res.c_up = up.c;
  res.c_dn = dn.c;
  res.eps_up = up.eps;
  res.eps_dn = dn.eps;
  res.density_up = d_up;
  res.density_dn = d_dn;
  res.density = d_up + d_dn;
  res.energy = e_prev;
  return res;
}

Eigen::MatrixXd eval_ao(const BasisSet& basis, const Eigen::MatrixXd& points) {
  const int m = static_cast<int>(points.rows());
  const int n = basis.n_ao();
  Eigen::MatrixXd out(m, n);
  for (int j = 0; j < n; ++j) {
    const auto& f = basis.functions[j];
    for (int p = 0; p < m; ++p) {
      const Eigen::Vector3d d = points.row(p).transpose() - f.center;
      const double r2 = d.squaredNorm();
      double val = 0.0;
      for (std::size_t k = 0; k < f.exponents.size(); ++k)
        val += f.coeffs[k] * std::exp(-f.exponents[k] * r2);
      double ang = 1.0;
      for (int t = 0; t < f.lx; ++t) ang *= d.x();
      for (int t = 0; t < f.ly; ++t) ang *= d.y();
      for (int t = 0; t < f.lz; ++t) ang *= d.z();
      out(p, j) = ang * val;
    }
  }
  return out;
}

OrbitalValues eval_orbitals(const ScfResult& scf, const BasisSet& basis,
                            const Eigen::MatrixXd& points) {
  const Eigen::MatrixXd ao = eval_ao(basis, points);
  OrbitalValues vals;
  vals.up = ao * scf.c_up.leftCols(scf.n_up);
  vals.dn = scf.n_dn > 0 ? Eigen::MatrixXd(ao * scf.c_dn.leftCols(scf.n_dn))
                         : Eigen::MatrixXd(points.rows(), 0);
  return vals;
}

double hf_log_density(const ScfResult& scf, const BasisSet& basis, const Molecule& mol,
                      const Eigen::MatrixXd& electron_positions) {
  const OrbitalValues v = eval_orbitals(scf, basis, electron_positions);
  double logd = 0.0;
  if (mol.n_up > 0) {
    const Eigen::MatrixXd block = v.up.topRows(mol.n_up);  // electrons x orbitals
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(block);
    double la = 0.0;
    for (int i = 0; i < block.rows(); ++i) la += std::log(std::abs(lu.matrixLU()(i, i)));
    logd += 2.0 * la;
  }
  if (mol.n_dn > 0) {
    const Eigen::MatrixXd block = v.dn.bottomRows(mol.n_dn);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(block);
    double la = 0.0;
    for (int i = 0; i < block.rows(); ++i) la += std::log(std::abs(lu.matrixLU()(i, i)));
    logd += 2.0 * la;
  }
  return logd;
}

void dump_integrals(const IntegralTables& tab, const ScfResult* scf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("dump_integrals: cannot open " + path);
  out.precision(17);
  out << "dlvmc-integrals v1\n";
  out << "n_ao " << tab.n_ao << "\n";
  auto dump_mat = [&](const char* name, const Eigen::MatrixXd& m) {
    out << name << "\n";
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) out << m(i, j) << (j + 1 == m.cols() ? "" : " ");
      out << "\n";
    }
  };
  dump_mat("S", tab.s);
  dump_mat("T", tab.t);
  dump_mat("V_ne", tab.v_ne);
  out << "ERI " << tab.eri.size() << "\n";
  for (int i = 0; i < tab.n_ao; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < tab.n_ao; ++k)
        for (int l = 0; l <= k; ++l) {
          if (IntegralTables::pair_index(i, j) < IntegralTables::pair_index(k, l)) continue;
          out << i << " " << j << " " << k << " " << l << " " << tab.eri_at(i, j, k, l) << "\n";
        }
  if (scf) dump_mat("D", scf->density);
}

}  // namespace dlvmc
