#include "dlvmc/integrals.hpp"

#include <array>
#include <cmath>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Series F_m(t) = e^{-t} sum_k (2t)^k / [(2m+1)(2m+3)...(2m+2k+1)], all terms
// positive; used below the switchover where upward recursion loses digits.
double boys_series(int m, double t) {
  double term = 1.0 / (2 * m + 1);
  double sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= 2.0 * t / (2 * m + 2 * k + 1);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return std::exp(-t) * sum;
}

}  // namespace

double boys_f0(double t) {
  if (t < 0.0) throw NumericError("boys_f0: negative argument");
  if (t < 1e-4) {
    // 1 - t/3 + t^2/10 - t^3/42 + t^4/216
    return 1.0 + t * (-1.0 / 3.0 + t * (0.1 + t * (-1.0 / 42.0 + t / 216.0)));
  }
  const double st = std::sqrt(t);
  return 0.5 * std::sqrt(kPi / t) * std::erf(st);
}

void boys_sequence(int n_max, double t, double* out) {
  if (t < 0.0) throw NumericError("boys_sequence: negative argument");
  if (t < 30.0) {
    out[n_max] = boys_series(n_max, t);
    const double et = std::exp(-t);
    for (int m = n_max; m > 0; --m) out[m - 1] = (2.0 * t * out[m] + et) / (2 * m - 1);
  } else {
    out[0] = boys_f0(t);
    const double et = std::exp(-t);
    for (int m = 0; m < n_max; ++m) out[m + 1] = ((2 * m + 1) * out[m] - et) / (2.0 * t);
  }
}

namespace {

// Hermite expansion coefficients E_t^{ij} along one dimension.
struct Hermite1d {
  // e[i][j][t]
  double e[4][4][8];
  Hermite1d(int imax, int jmax, double a, double b, double ab) {
    const double p = a + b;
    const double mu = a * b / p;
    const double xpa = -b * ab / p;  // P - A, with ab = A - B
    const double xpb = a * ab / p;   // P - B
    for (auto& x : e)
      for (auto& y : x)
        for (auto& z : y) z = 0.0;
    e[0][0][0] = std::exp(-mu * ab * ab);
    for (int i = 1; i <= imax; ++i) {
      for (int t = 0; t <= i; ++t) {
        double v = 0.0;
        if (t > 0) v += e[i - 1][0][t - 1] / (2.0 * p);
        v += xpa * e[i - 1][0][t];
        v += (t + 1) * e[i - 1][0][t + 1];
        e[i][0][t] = v;
      }
    }
    for (int j = 1; j <= jmax; ++j) {
      for (int i = 0; i <= imax; ++i) {
        for (int t = 0; t <= i + j; ++t) {
          double v = 0.0;
          if (t > 0) v += e[i][j - 1][t - 1] / (2.0 * p);
          v += xpb * e[i][j - 1][t];
          v += (t + 1) * e[i][j - 1][t + 1];
          e[i][j][t] = v;
        }
      }
    }
  }
};

struct Prim {
  double a;
  Eigen::Vector3d center;
  int l[3];
};

double overlap_1d(const Hermite1d& h, int i, int j, double p) {
  return h.e[i][j][0] * std::sqrt(kPi / p);
}

double prim_overlap(const Prim& pa, const Prim& pb) {
  const double p = pa.a + pb.a;
  double s = 1.0;
  for (int d = 0; d < 3; ++d) {
    Hermite1d h(pa.l[d] + 2, pb.l[d] + 2, pa.a, pb.a, pa.center[d] - pb.center[d]);
    s *= overlap_1d(h, pa.l[d], pb.l[d], p);
  }
  return s;
}

// <a| -1/2 del^2 |b> via angular-momentum raising/lowering on b.
double prim_kinetic(const Prim& pa, const Prim& pb) {
  const double p = pa.a + pb.a;
  const double b = pb.a;
  double s[3][3];  // s[d][0]=S(l_b-2), s[d][1]=S(l_b), s[d][2]=S(l_b+2) along dim d
  for (int d = 0; d < 3; ++d) {
    Hermite1d h(pa.l[d] + 2, pb.l[d] + 2, pa.a, pb.a, pa.center[d] - pb.center[d]);
    s[d][1] = overlap_1d(h, pa.l[d], pb.l[d], p);
    s[d][2] = overlap_1d(h, pa.l[d], pb.l[d] + 2, p);
    s[d][0] = pb.l[d] >= 2 ? overlap_1d(h, pa.l[d], pb.l[d] - 2, p) : 0.0;
  }
  double t = 0.0;
  for (int d = 0; d < 3; ++d) {
    const int j = pb.l[d];
    double td = -2.0 * b * (2 * j + 1) * s[d][1] + 4.0 * b * b * s[d][2];
    if (j >= 2) td += j * (j - 1) * s[d][0];
    td *= -0.5;
    t += td * s[(d + 1) % 3][1] * s[(d + 2) % 3][1];
  }
  return t;
}

// Hermite Coulomb integrals R^0_{tuv} for all t+u+v <= n via recursion.
// n <= 4 covers every s/p case (pp|pp).
struct HermiteCoulomb {
  double r[5][5][5];
  HermiteCoulomb(int n, double p, const Eigen::Vector3d& pc) {
    if (n > 4) throw UnsupportedBasisError("HermiteCoulomb: order above pp|pp requested");
    double f[8];
    const double t2 = p * pc.squaredNorm();
    boys_sequence(n, t2, f);
    // r_n[order][t][u][v]; build by descending auxiliary order
    double rn[5][5][5][5] = {};
    for (int o = n; o >= 0; --o) {
      rn[o][0][0][0] = std::pow(-2.0 * p, o) * f[o];
    }
    for (int o = n - 1; o >= 0; --o) {
      for (int t = 0; t <= n - o; ++t)
        for (int u = 0; u <= n - o - t; ++u)
          for (int v = 0; v <= n - o - t - u; ++v) {
            if (t + u + v == 0) continue;
            double val = 0.0;
            if (t > 0) {
              val = pc.x() * rn[o + 1][t - 1][u][v];
              if (t > 1) val += (t - 1) * rn[o + 1][t - 2][u][v];
            } else if (u > 0) {
              val = pc.y() * rn[o + 1][t][u - 1][v];
              if (u > 1) val += (u - 1) * rn[o + 1][t][u - 2][v];
            } else {
              val = pc.z() * rn[o + 1][t][u][v - 1];
              if (v > 1) val += (v - 1) * rn[o + 1][t][u][v - 2];
            }
            rn[o][t][u][v] = val;
          }
    }
    for (int t = 0; t <= n; ++t)
      for (int u = 0; u <= n - t; ++u)
        for (int v = 0; v <= n - t - u; ++v) r[t][u][v] = rn[0][t][u][v];
  }
};

double prim_nuclear(const Prim& pa, const Prim& pb, const Eigen::Vector3d& c) {
  const double p = pa.a + pb.a;
  const Eigen::Vector3d pcenter = (pa.a * pa.center + pb.a * pb.center) / p;
  const int ltot = pa.l[0] + pa.l[1] + pa.l[2] + pb.l[0] + pb.l[1] + pb.l[2];
  Hermite1d hx(pa.l[0], pb.l[0], pa.a, pb.a, pa.center[0] - pb.center[0]);
  Hermite1d hy(pa.l[1], pb.l[1], pa.a, pb.a, pa.center[1] - pb.center[1]);
  Hermite1d hz(pa.l[2], pb.l[2], pa.a, pb.a, pa.center[2] - pb.center[2]);
  HermiteCoulomb hc(ltot, p, pcenter - c);
  double sum = 0.0;
  for (int t = 0; t <= pa.l[0] + pb.l[0]; ++t)
    for (int u = 0; u <= pa.l[1] + pb.l[1]; ++u)
      for (int v = 0; v <= pa.l[2] + pb.l[2]; ++v)
        sum += hx.e[pa.l[0]][pb.l[0]][t] * hy.e[pa.l[1]][pb.l[1]][u] *
               hz.e[pa.l[2]][pb.l[2]][v] * hc.r[t][u][v];
  return 2.0 * kPi / p * sum;
}

double prim_eri(const Prim& pa, const Prim& pb, const Prim& pc, const Prim& pd) {
  const double p = pa.a + pb.a;
  const double q = pc.a + pd.a;
  const double alpha = p * q / (p + q);
  const Eigen::Vector3d pp = (pa.a * pa.center + pb.a * pb.center) / p;
  const Eigen::Vector3d qq = (pc.a * pc.center + pd.a * pd.center) / q;
  const int lab = pa.l[0] + pa.l[1] + pa.l[2] + pb.l[0] + pb.l[1] + pb.l[2];
  const int lcd = pc.l[0] + pc.l[1] + pc.l[2] + pd.l[0] + pd.l[1] + pd.l[2];
  Hermite1d ax(pa.l[0], pb.l[0], pa.a, pb.a, pa.center[0] - pb.center[0]);
  Hermite1d ay(pa.l[1], pb.l[1], pa.a, pb.a, pa.center[1] - pb.center[1]);
  Hermite1d az(pa.l[2], pb.l[2], pa.a, pb.a, pa.center[2] - pb.center[2]);
  Hermite1d bx(pc.l[0], pd.l[0], pc.a, pd.a, pc.center[0] - pd.center[0]);
  Hermite1d by(pc.l[1], pd.l[1], pc.a, pd.a, pc.center[1] - pd.center[1]);
  Hermite1d bz(pc.l[2], pd.l[2], pc.a, pd.a, pc.center[2] - pd.center[2]);
  HermiteCoulomb hc(lab + lcd, alpha, pp - qq);
  double sum = 0.0;
  for (int t = 0; t <= pa.l[0] + pb.l[0]; ++t)
    for (int u = 0; u <= pa.l[1] + pb.l[1]; ++u)
      for (int v = 0; v <= pa.l[2] + pb.l[2]; ++v) {
        const double eab = ax.e[pa.l[0]][pb.l[0]][t] * ay.e[pa.l[1]][pb.l[1]][u] *
                           az.e[pa.l[2]][pb.l[2]][v];
        if (eab == 0.0) continue;
        for (int tt = 0; tt <= pc.l[0] + pd.l[0]; ++tt)
          for (int uu = 0; uu <= pc.l[1] + pd.l[1]; ++uu)
            for (int vv = 0; vv <= pc.l[2] + pd.l[2]; ++vv) {
              const double ecd = bx.e[pc.l[0]][pd.l[0]][tt] * by.e[pc.l[1]][pd.l[1]][uu] *
                                 bz.e[pc.l[2]][pd.l[2]][vv];
              if (ecd == 0.0) continue;
              const int sign = ((tt + uu + vv) % 2 == 0) ? 1 : -1;
              sum += eab * ecd * sign * hc.r[t + tt][u + uu][v + vv];
            }
      }
  return 2.0 * std::pow(kPi, 2.5) / (p * q * std::sqrt(p + q)) * sum;
}

// Accumulate a contracted matrix element by looping primitive pairs.
template <class F>
double contract2(const BasisFunction& fa, const BasisFunction& fb, F&& prim_fn) {
  double sum = 0.0;
  Prim pa{0.0, fa.center, {fa.lx, fa.ly, fa.lz}};
  Prim pb{0.0, fb.center, {fb.lx, fb.ly, fb.lz}};
  for (std::size_t i = 0; i < fa.exponents.size(); ++i) {
    pa.a = fa.exponents[i];
    for (std::size_t j = 0; j < fb.exponents.size(); ++j) {
      pb.a = fb.exponents[j];
      sum += fa.coeffs[i] * fb.coeffs[j] * prim_fn(pa, pb);
    }
  }
  return sum;
}

}  // namespace

IntegralTables compute_integrals(const Molecule& mol, const BasisSet& basis) {
  for (const auto& f : basis.functions)
    if (f.l() > 1)
      throw UnsupportedBasisError("compute_integrals: angular momentum above p is unsupported");

  const int n = basis.n_ao();
  IntegralTables tab;
  tab.n_ao = n;
  tab.s.setZero(n, n);
  tab.t.setZero(n, n);
  tab.v_ne.setZero(n, n);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const auto& fa = basis.functions[i];
      const auto& fb = basis.functions[j];
      const double s = contract2(fa, fb, [](const Prim& a, const Prim& b) { return prim_overlap(a, b); });
      const double t = contract2(fa, fb, [](const Prim& a, const Prim& b) { return prim_kinetic(a, b); });
      double v = 0.0;
      for (const auto& nuc : mol.nuclei) {
        v += -double(nuc.charge) * contract2(fa, fb, [&](const Prim& a, const Prim& b) {
          return prim_nuclear(a, b, nuc.position);
        });
      }
      tab.s(i, j) = tab.s(j, i) = s;
      tab.t(i, j) = tab.t(j, i) = t;
      tab.v_ne(i, j) = tab.v_ne(j, i) = v;
    }
  }

  const std::size_t n_pair = static_cast<std::size_t>(n) * (n + 1) / 2;
  tab.eri.assign(n_pair * (n_pair + 1) / 2, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const std::size_t ij = IntegralTables::pair_index(i, j);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l <= k; ++l) {
          const std::size_t kl = IntegralTables::pair_index(k, l);
          if (ij < kl) continue;
          double val = 0.0;
          const auto& fa = basis.functions[i];
          const auto& fb = basis.functions[j];
          const auto& fc = basis.functions[k];
          const auto& fd = basis.functions[l];
          Prim pa{0, fa.center, {fa.lx, fa.ly, fa.lz}}, pb{0, fb.center, {fb.lx, fb.ly, fb.lz}};
          Prim pc{0, fc.center, {fc.lx, fc.ly, fc.lz}}, pd{0, fd.center, {fd.lx, fd.ly, fd.lz}};
          for (std::size_t a = 0; a < fa.exponents.size(); ++a)
            for (std::size_t b = 0; b < fb.exponents.size(); ++b)
              for (std::size_t c = 0; c < fc.exponents.size(); ++c)
                for (std::size_t d = 0; d < fd.exponents.size(); ++d) {
                  pa.a = fa.exponents[a];
                  pb.a = fb.exponents[b];
                  pc.a = fc.exponents[c];
                  pd.a = fd.exponents[d];
                  val += fa.coeffs[a] * fb.coeffs[b] * fc.coeffs[c] * fd.coeffs[d] *
                         prim_eri(pa, pb, pc, pd);
                }
          tab.eri[ij * (ij + 1) / 2 + kl] = val;
        }
    }
  return tab;
}

}  // namespace dlvmc
