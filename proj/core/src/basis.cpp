#include "dlvmc/basis.hpp"

#include <array>
#include <cmath>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Least-squares expansions of unit-exponent Slater radial functions in
// normalized Gaussians (per-shell fits; s and p are fitted independently).
// Exponents scale with zeta^2, coefficients are scale-invariant.
struct ShellFit {
  int n, l;
  std::array<double, 6> alpha;
  std::array<double, 6> coeff;
};

const ShellFit kFits3[] = {
    {1, 0, {2.227660782541e+00, 4.057711907512e-01, 1.098175114195e-01},
            {1.543289469300e-01, 5.353281394235e-01, 4.446345670305e-01}},
    {2, 0, {2.581577573213e+00, 1.567622196456e-01, 6.018332820061e-02},
            {-5.994475256195e-02, 5.960384776884e-01, 4.581786943849e-01}},
    {2, 1, {9.192378276321e-01, 2.359194304413e-01, 8.009805311610e-02},
            {1.623948772846e-01, 5.661709094997e-01, 4.223071303575e-01}},
    {3, 0, {5.641488071166e-01, 6.924420811148e-02, 3.269528317492e-02},
            {-1.782577881498e-01, 8.612763042146e-01, 2.261840498972e-01}},
    {3, 1, {2.692881241228e+00, 1.489359691349e-01, 5.739585240079e-02},
            {-1.061946011721e-02, 5.218563806844e-01, 5.450015636335e-01}},
    {4, 0, {2.267938818989e-01, 4.448177699767e-02, 2.195293577172e-02},
            {-3.349048201810e-01, 1.056744826572e+00, 1.256659971807e-01}},
    {4, 1, {4.859692248088e-01, 7.430216171653e-02, 3.653340582171e-02},
            {-6.147822551912e-02, 6.604173446358e-01, 3.932638197165e-01}},
};

const ShellFit kFits6[] = {
    {1, 0,
     {2.310302376677e+01, 4.235913794827e+00, 1.185056214087e+00, 4.070986917750e-01,
      1.580883292749e-01, 6.510950703660e-02},
     {9.163603053739e-03, 4.936150391755e-02, 1.685383769379e-01, 3.705629794913e-01,
      4.164914388178e-01, 1.303339069863e-01}},
    {2, 0,
     {2.768483637695e+01, 5.077132387355e+00, 1.426785131781e+00, 2.040336825446e-01,
      9.260301826846e-02, 4.416184680138e-02},
     {-4.151294320949e-03, -2.067024940153e-02, -5.150303190498e-02, 3.346267657360e-01,
      5.621063897891e-01, 1.712995858570e-01}},
    {2, 1,
     {5.868287319915e+00, 1.530329705869e+00, 5.475662660644e-01, 2.288932564231e-01,
      1.046656018702e-01, 4.948218958780e-02},
     {7.924225552090e-03, 5.144108681351e-02, 1.898400985684e-01, 4.049861405852e-01,
      4.012363805604e-01, 1.051854811641e-01}},
    {3, 0,
     {3.273000006501e+00, 9.200553833080e-01, 3.593341481436e-01, 8.636693310300e-02,
      4.797372678385e-02, 2.724733330113e-02},
     {-6.775728875511e-03, -5.639364318265e-02, -1.587852628914e-01, 5.534522583399e-01,
      5.015365586391e-01, 7.223556171745e-02}},
    {3, 1,
     {5.077940222266e+00, 1.340783074223e+00, 2.248434831805e-01, 1.131739028838e-01,
      6.076382225682e-02, 3.315410608912e-02},
     {-3.329957419437e-03, -1.419487743374e-02, 1.639399548362e-01, 4.485386169246e-01,
      3.908797489429e-01, 7.411297280354e-02}},
    {4, 0,
     {3.656910740168e+00, 3.547648283398e-01, 1.703447797661e-01, 5.293942520958e-02,
      3.161079858931e-02, 1.830287059816e-02},
     {1.269468965157e-03, -9.052284446758e-02, -3.107212874151e-01, 7.791645532970e-01,
      4.451848621742e-01, 2.236639947647e-02}},
    {4, 1,
     {2.389737114382e+00, 7.960949748537e-01, 3.415537649881e-01, 8.847435396474e-02,
      4.958249766645e-02, 2.816931373145e-02},
     {-1.665890476610e-03, -1.657473070811e-02, -5.958510847524e-02, 4.053114522461e-01,
      5.433956561919e-01, 1.204973473116e-01}},
};

const ShellFit& fit_for(int n, int l, BasisKind kind) {
  const ShellFit* table = kind == BasisKind::Sto3g ? kFits3 : kFits6;
  const int count = 7;
  for (int i = 0; i < count; ++i)
    if (table[i].n == n && table[i].l == l) return table[i];
  throw UnsupportedBasisError("no embedded fit for shell n=" + std::to_string(n) +
                              " l=" + std::to_string(l));
}

int fit_size(BasisKind kind) { return kind == BasisKind::Sto3g ? 3 : 6; }

// Ground-configuration occupation of shell (n, l) for Z <= 20.
int shell_occupation(int z, int n, int l) {
  struct Entry {
    int n, l, cap;
  };
  // aufbau order for s/p-block elements
  static const Entry order[] = {{1, 0, 2}, {2, 0, 2}, {2, 1, 6}, {3, 0, 2},
                                {3, 1, 6}, {4, 0, 2}};
  int remaining = z;
  for (const auto& e : order) {
    const int occ = std::min(remaining, e.cap);
    if (e.n == n && e.l == l) return occ;
    remaining -= occ;
    if (remaining <= 0) break;
  }
  return 0;
}

// s and p of one principal shell form one Slater screening group.
double group_occupation(int z, int n) {
  return shell_occupation(z, n, 0) + (n >= 2 ? shell_occupation(z, n, 1) : 0);
}

}  // namespace

double slater_zeta(int z, int n, int l) {
  if (z > 20)
    throw UnsupportedBasisError("slater_zeta: d-block elements are unsupported (Z=" +
                                std::to_string(z) + ")");
  // unoccupied valence p inherits the ns exponent (shared screening group)
  int n_eff = n;
  (void)l;
  double same = group_occupation(z, n_eff) - 1.0;
  if (same < 0.0) same = group_occupation(z, n_eff);  // shell empty: screen as if added
  double sigma = same * (n_eff == 1 ? 0.30 : 0.35);
  if (n_eff >= 2) sigma += 0.85 * group_occupation(z, n_eff - 1);
  for (int m = 1; m <= n_eff - 2; ++m) sigma += 1.00 * group_occupation(z, m);
  static const double n_star[] = {0.0, 1.0, 2.0, 3.0, 3.7};
  const double zeta = (z - sigma) / n_star[n_eff];
  if (zeta <= 0.0)
    throw UnsupportedBasisError("slater_zeta: non-positive effective exponent");
  return zeta;
}

AtomBasis atom_basis(int z, BasisKind kind) {
  if (z < 1) throw ConfigError("atom_basis: invalid Z");
  if (z > 20)
    throw UnsupportedBasisError(
        "atom_basis: elements with occupied d shells are unsupported (Z=" + std::to_string(z) +
        ")");
  // occupied shells plus the valence p shell (frames need a p block for Z>=5;
  // standard minimal sets carry the full valence shell anyway)
  struct ShellSpec {
    int n, l;
  };
  std::vector<ShellSpec> specs;
  specs.push_back({1, 0});
  if (z >= 3) {
    specs.push_back({2, 0});
    specs.push_back({2, 1});
  }
  if (z >= 11) {
    specs.push_back({3, 0});
    specs.push_back({3, 1});
  }
  if (z >= 19) {
    specs.push_back({4, 0});
    specs.push_back({4, 1});
  }

  AtomBasis ab;
  ab.z = z;
  for (const auto& sp : specs) {
    // p shells share the s exponent of their group when unoccupied
    double zeta;
    if (sp.l == 1 && shell_occupation(z, sp.n, 1) == 0)
      zeta = slater_zeta(z, sp.n, 0);
    else
      zeta = slater_zeta(z, sp.n, sp.l);
    // molecular-standard hydrogen exponent for the 3-Gaussian contraction
    if (kind == BasisKind::Sto3g && z == 1) zeta = 1.24;

    const ShellFit& fit = fit_for(sp.n, sp.l, kind);
    GaussianShell shell;
    shell.l = sp.l;
    for (int i = 0; i < fit_size(kind); ++i) {
      shell.exponents.push_back(fit.alpha[i] * zeta * zeta);
      shell.coeffs.push_back(fit.coeff[i]);
    }
    ab.shells.push_back(std::move(shell));
  }
  return ab;
}

namespace {

double primitive_norm(double alpha, int l) {
  // cartesian x^l (or y/z) with (2l-1)!! = 1 for l <= 1
  const double base = std::pow(2.0 * alpha / kPi, 0.75);
  return l == 0 ? base : base * 2.0 * std::sqrt(alpha);
}

double double_factorial(int n) {
  double v = 1.0;
  for (int i = n; i > 1; i -= 2) v *= i;
  return v;
}

// same-center overlap of two primitives with identical (lx,ly,lz)
double prim_self_overlap(double a, double b, int lx, int ly, int lz) {
  const double p = a + b;
  double v = 1.0;
  const int ls[3] = {lx, ly, lz};
  for (int d = 0; d < 3; ++d)
    v *= double_factorial(2 * ls[d] - 1) / std::pow(2.0 * p, ls[d]) * std::sqrt(kPi / p);
  return v;
}

}  // namespace

double ao_self_overlap(const BasisFunction& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.exponents.size(); ++i)
    for (std::size_t j = 0; j < f.exponents.size(); ++j)
      s += f.coeffs[i] * f.coeffs[j] *
           prim_self_overlap(f.exponents[i], f.exponents[j], f.lx, f.ly, f.lz);
  return s;
}

BasisSet build_basis(const Molecule& mol, BasisKind kind) {
  BasisSet bs;
  bs.kind = kind;
  for (int nuc = 0; nuc < mol.n_nuc(); ++nuc) {
    const AtomBasis ab = atom_basis(mol.nuclei[nuc].charge, kind);
    for (const auto& shell : ab.shells) {
      const int n_comp = shell.l == 0 ? 1 : 3;
      for (int comp = 0; comp < n_comp; ++comp) {
        BasisFunction f;
        f.center = mol.nuclei[nuc].position;
        f.nucleus = nuc;
        f.lx = shell.l == 1 && comp == 0 ? 1 : 0;
        f.ly = shell.l == 1 && comp == 1 ? 1 : 0;
        f.lz = shell.l == 1 && comp == 2 ? 1 : 0;
        f.exponents = shell.exponents;
        f.coeffs.resize(shell.coeffs.size());
        for (std::size_t i = 0; i < shell.coeffs.size(); ++i)
          f.coeffs[i] = shell.coeffs[i] * primitive_norm(shell.exponents[i], shell.l);
        const double s = ao_self_overlap(f);
        for (auto& c : f.coeffs) c /= std::sqrt(s);
        bs.functions.push_back(std::move(f));
      }
    }
  }
  return bs;
}

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "sto-6g") return BasisKind::Sto6g;
  if (s == "sto-3g") return BasisKind::Sto3g;
  throw ConfigError("unknown basis kind: " + s);
}

std::string to_string(BasisKind kind) {
  return kind == BasisKind::Sto6g ? "sto-6g" : "sto-3g";
}

}  // namespace dlvmc
