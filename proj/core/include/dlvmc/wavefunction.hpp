#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "dlvmc/embedding.hpp"
#include "dlvmc/engine.hpp"
#include "dlvmc/features.hpp"
#include "dlvmc/frames.hpp"
#include "dlvmc/system.hpp"

namespace dlvmc {

enum class EnvelopeInit { Physical, Ones };

EnvelopeInit envelope_init_from_string(const std::string& s);
std::string to_string(EnvelopeInit e);
DetMode det_mode_from_string(const std::string& s);
std::string to_string(DetMode m);

struct WfConfig {
  int n_det = 32;
  DetMode det_mode = DetMode::Dense;
  EnvelopeInit envelope_init = EnvelopeInit::Physical;
  EmbeddingConfig embedding;
  FeatureConfig features;
};

/// All trainable tensors. Envelope exponents are stored as free reals and
/// pass through |.| in the forward, keeping the effective exponent >= 0.
struct WfParams {
  WfConfig cfg;
  EmbeddingParams embedding;
  std::array<Mat, 2> w_orb;       // (n_det * n_orb[ch], width_one)
  std::array<Mat, 2> env_pi;      // (n_det * n_orb[ch], n_nuc)
  std::array<Mat, 2> env_omega;   // raw exponents, same shape
  int n_orb_up = 0, n_orb_dn = 0;
  int n_up = 0, n_dn = 0, n_nuc = 0;

  int n_orb(int spin) const { return spin == 0 ? n_orb_up : n_orb_dn; }
};

struct LogPsi {
  double sign = 0.0;  // -1, 0 on the nodal set, +1
  double log_abs = 0.0;
};

/// Hydrogen-like shell index for orbital k (1-based): the smallest n with
/// 1^2 + ... + n^2 >= k.
int principal_quantum_number(int k);

WfParams init_params(const WfConfig& cfg, const Molecule& mol, std::uint64_t seed);
long count_params(const WfParams& p);

/// Stable enumeration of every trainable array (optimizer/checkpoint order;
/// identical to the tape binding order).
struct ParamRef {
  std::string name;
  Mat* mat;
};
std::vector<ParamRef> param_refs(WfParams& p);

/// Envelope values Omega for one spin channel: (rows, n_det*n_orb).
Mat envelopes(const WfParams& p, const Mat& rho_norms, int spin);

template <class E>
struct BoundWf {
  BoundEmbedding<E> emb;
  std::array<typename E::P, 2> w_orb{}, pi{}, omega{};
};

template <class E>
BoundWf<E> bind_wf(E& eng, const WfParams& p) {
  BoundWf<E> b;
  b.emb = bind_embedding(eng, p.embedding);
  for (int s = 0; s < 2; ++s) b.w_orb[s] = eng.param(p.w_orb[s]);
  for (int s = 0; s < 2; ++s) b.pi[s] = eng.param(p.env_pi[s]);
  for (int s = 0; s < 2; ++s) b.omega[s] = eng.param(p.env_omega[s]);
  return b;
}

template <class E>
struct OrbitalMatrices {
  typename E::T m_up, m_dn;  // (n_walkers*n_spin, n_det*n_orb)
};

/// Lambda .* Omega for both spin channels.
template <class E>
OrbitalMatrices<E> forward_orbitals(E& eng, const BoundWf<E>& b, const WfParams& p,
                                    const FeatureTensors<E>& feats, const BatchLayout& lay) {
  auto h_l = embed(eng, b.emb, feats, lay);
  OrbitalMatrices<E> out;
  for (int s = 0; s < 2; ++s) {
    auto h_s = eng.spin_rows(h_l, lay, s);
    auto lam = eng.linear(b.w_orb[s], h_s);
    auto rho_s = eng.spin_rows(feats.rho_e, lay, s);
    auto om = eng.envelope_eval(rho_s, b.pi[s], b.omega[s]);
    auto m = eng.hadamard(lam, om);
    if (s == 0)
      out.m_up = std::move(m);
    else
      out.m_dn = std::move(m);
  }
  return out;
}

template <class E>
SlaterResult<typename E::T> forward_log_psi(E& eng, const BoundWf<E>& b, const WfParams& p,
                                            const FeatureTensors<E>& feats,
                                            const BatchLayout& lay) {
  auto m = forward_orbitals(eng, b, p, feats, lay);
  return eng.slater_logsumexp(m.m_up, m.m_dn, lay, p.cfg.n_det, p.cfg.det_mode);
}

/// Value path, whole batch. positions: (n_walkers*n_el, 3).
struct LogPsiBatch {
  Eigen::VectorXd log_abs;
  Eigen::VectorXd sign;
};
LogPsiBatch log_psi_batch(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                          const Mat& positions, int n_walkers);
LogPsi log_psi(const WfParams& p, const Molecule& mol, const FrameSet* frames,
               const Mat& positions);

/// Forward-jet path: coordinate gradient and diagonal curvature of log|psi|.
struct WfJets {
  Eigen::VectorXd log_abs;
  Eigen::VectorXd sign;
  Mat dlog;   // (n_walkers, 3*n_el)
  Mat d2log;  // (n_walkers, 3*n_el)
};
WfJets log_psi_jets(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                    const Mat& positions, int n_walkers);

/// Reverse path: a tape whose leaves are the parameters, in param_refs order.
struct WfTapeForward {
  std::unique_ptr<Tape> tape;
  std::vector<Tape::Ref> param_nodes;
  Tape::Ref log_psi = -1;  // (n_walkers, 1); -1 when stopped at orbitals
  Eigen::VectorXd sign;
  Tape::Ref m_up = -1, m_dn = -1;
};
WfTapeForward log_psi_tape(const WfParams& p, const Molecule& mol, const FrameSet* frames,
                           const Mat& positions, int n_walkers, bool stop_at_orbitals = false);

}  // namespace dlvmc
