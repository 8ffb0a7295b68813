#include "dlvmc/wavefunction.hpp"

#include <cmath>

#include "dlvmc/errors.hpp"
#include "dlvmc/rng.hpp"

namespace dlvmc {

EnvelopeInit envelope_init_from_string(const std::string& s) {
  if (s == "physical") return EnvelopeInit::Physical;
  if (s == "ones") return EnvelopeInit::Ones;
  throw ConfigError("unknown envelope init: " + s);
}
std::string to_string(EnvelopeInit e) {
  return e == EnvelopeInit::Physical ? "physical" : "ones";
}
DetMode det_mode_from_string(const std::string& s) {
  if (s == "dense") return DetMode::Dense;
  if (s == "block") return DetMode::Block;
  throw ConfigError("unknown determinant mode: " + s);
}
std::string to_string(DetMode m) { return m == DetMode::Dense ? "dense" : "block"; }

int principal_quantum_number(int k) {
  if (k < 1) throw ConfigError("principal_quantum_number: k must be >= 1");
  long cap = 0;
  for (int n = 1;; ++n) {
    cap += long(n) * n;
    if (k <= cap) return n;
  }
}

WfParams init_params(const WfConfig& cfg, const Molecule& mol, std::uint64_t seed) {
  WfParams p;
  p.cfg = cfg;
  p.n_up = mol.n_up;
  p.n_dn = mol.n_dn;
  p.n_nuc = mol.n_nuc();
  p.n_orb_up = cfg.det_mode == DetMode::Dense ? mol.n_el : mol.n_up;
  p.n_orb_dn = cfg.det_mode == DetMode::Dense ? mol.n_el : mol.n_dn;
  p.embedding = init_embedding_params(cfg.embedding, cfg.features, mol.n_nuc(), seed);

  const int w1 = cfg.embedding.width_one;
  const double std_dev = 1.0 / std::sqrt(double(w1));
  for (int s = 0; s < 2; ++s) {
    const int n_orb = p.n_orb(s);
    const long rows = long(cfg.n_det) * n_orb;
    p.w_orb[s].resize(rows, w1);
    for (long r = 0; r < rows; ++r)
      for (int c = 0; c < w1; ++c)
        p.w_orb[s](r, c) = std_dev * rng_gaussian(seed, RngStream::ParamInit,
                                                  0x1000u + std::uint64_t(s),
                                                  std::uint64_t(r), std::uint64_t(c));
    p.env_pi[s] = Mat::Ones(rows, mol.n_nuc());
    p.env_omega[s].resize(rows, mol.n_nuc());
    for (int d = 0; d < cfg.n_det; ++d)
      for (int k = 0; k < n_orb; ++k) {
        const int nk = principal_quantum_number(k + 1);
        for (int nuc = 0; nuc < mol.n_nuc(); ++nuc) {
          const double w = cfg.envelope_init == EnvelopeInit::Ones
                               ? 1.0
                               : double(mol.nuclei[nuc].charge) / double(nk);
          p.env_omega[s](long(d) * n_orb + k, nuc) = w;
        }
      }
  }
  return p;
}

long count_params(const WfParams& p) {
  long n = count_embedding_params(p.embedding);
  for (int s = 0; s < 2; ++s)
    n += p.w_orb[s].size() + p.env_pi[s].size() + p.env_omega[s].size();
  return n;
}

std::vector<ParamRef> param_refs(WfParams& p) {
  std::vector<ParamRef> refs;
  auto add_affine = [&](const std::string& name, AffineParams& a) {
    if (a.empty()) return;
    refs.push_back({name + ".w", &a.w});
    refs.push_back({name + ".b", &a.b});
  };
  for (std::size_t l = 0; l < p.embedding.iters.size(); ++l) {
    auto& it = p.embedding.iters[l];
    const std::string base = "embed." + std::to_string(l) + ".";
    add_affine(base + "a_one", it.a_one);
    add_affine(base + "a_same", it.a_same);
    add_affine(base + "a_diff", it.a_diff);
    add_affine(base + "a_nuc", it.a_nuc);
    add_affine(base + "b_same", it.b_same);
    add_affine(base + "b_diff", it.b_diff);
    add_affine(base + "b_nuc", it.b_nuc);
    add_affine(base + "c_same", it.c_same);
    add_affine(base + "c_diff", it.c_diff);
    add_affine(base + "c_nuc", it.c_nuc);
  }
  if (p.embedding.z_emb.size() > 0) refs.push_back({"embed.z_emb", &p.embedding.z_emb});
  for (int s = 0; s < 2; ++s)
    refs.push_back({std::string("orbitals.w_") + (s == 0 ? "up" : "dn"), &p.w_orb[s]});
  for (int s = 0; s < 2; ++s)
    refs.push_back({std::string("envelope.pi_") + (s == 0 ? "up" : "dn"), &p.env_pi[s]});
  for (int s = 0; s < 2; ++s)
    refs.push_back({std::string("envelope.omega_") + (s == 0 ? "up" : "dn"), &p.env_omega[s]});
  return refs;
}

Mat envelopes(const WfParams& p, const Mat& rho_norms, int spin) {
  return detail::envelope_v(rho_norms, p.env_pi[spin], p.env_omega[spin]);
}

namespace {

void check_compatible(const WfParams& p, const Molecule& mol) {
  if (p.n_up != mol.n_up || p.n_dn != mol.n_dn || p.n_nuc != mol.n_nuc())
    throw ConfigError("wavefunction parameters were initialized for a different system");
}

}  // namespace

LogPsiBatch log_psi_batch(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                          const Mat& positions, int n_walkers) {
  check_compatible(p, mol);
  BatchLayout lay{n_walkers, mol.n_el, mol.n_up, mol.n_nuc()};
  ValueEngine eng;
  auto bound = bind_wf(eng, p);
  auto feats = build_feature_tensors(eng, positions, mol, frames, lay, p.cfg.features);
  auto r = forward_log_psi(eng, bound, p, feats, lay);
  LogPsiBatch out;
  out.log_abs = r.log_psi.col(0);
  out.sign = std::move(r.sign);
  return out;
}

LogPsi log_psi(const WfParams& p, const Molecule& mol, const FrameSet* frames,
               const Mat& positions) {
  auto b = log_psi_batch(p, mol, frames, positions, 1);
  return LogPsi{b.sign[0], b.log_abs[0]};
}

WfJets log_psi_jets(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                    const Mat& positions, int n_walkers) {
  check_compatible(p, mol);
  BatchLayout lay{n_walkers, mol.n_el, mol.n_up, mol.n_nuc()};
  const int k = 3 * mol.n_el;
  JetEngine eng(k);
  auto bound = bind_wf(eng, p);
  auto r_seed = eng.positions(positions);
  auto feats = build_feature_tensors(eng, r_seed, mol, frames, lay, p.cfg.features);
  auto r = forward_log_psi(eng, bound, p, feats, lay);

  WfJets out;
  out.log_abs = r.log_psi.v.col(0);
  out.sign = std::move(r.sign);
  out.dlog.resize(n_walkers, k);
  out.d2log.resize(n_walkers, k);
  for (int kk = 0; kk < k; ++kk)
    for (int w = 0; w < n_walkers; ++w) {
      out.dlog(w, kk) = r.log_psi.g(kk * n_walkers + w, 0);
      out.d2log(w, kk) = r.log_psi.h(kk * n_walkers + w, 0);
    }
  return out;
}

WfTapeForward log_psi_tape(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                           const Mat& positions, int n_walkers, bool stop_at_orbitals) {
  check_compatible(p, mol);
  BatchLayout lay{n_walkers, mol.n_el, mol.n_up, mol.n_nuc()};
  WfTapeForward out;
  out.tape = std::make_unique<Tape>();
  TapeEngine eng(*out.tape);
  eng.record = &out.param_nodes;
  auto bound = bind_wf(eng, p);
  eng.record = nullptr;

  ValueEngine ve;
  auto vfeats = build_feature_tensors(ve, positions, mol, frames, lay, p.cfg.features);
  FeatureTensors<TapeEngine> feats;
  feats.h0 = eng.constant(vfeats.h0);
  feats.v0 = eng.constant(vfeats.v0);
  feats.g0 = eng.constant(vfeats.g0);
  feats.rho_e = eng.constant(vfeats.rho_e);

  if (stop_at_orbitals) {
    auto m = forward_orbitals(eng, bound, p, feats, lay);
    out.m_up = m.m_up;
    out.m_dn = m.m_dn;
  } else {
    auto r = forward_log_psi(eng, bound, p, feats, lay);
    out.log_psi = r.log_psi;
    out.sign = std::move(r.sign);
  }
  return out;
}

}  // namespace dlvmc
