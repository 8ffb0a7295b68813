#pragma once

#include <string>

#include "dlvmc/engine.hpp"
#include "dlvmc/errors.hpp"
#include "dlvmc/frames.hpp"
#include "dlvmc/system.hpp"

namespace dlvmc {

enum class FeatureMode { LocalFrames, RawDiffs, DistancesOnly };

FeatureMode feature_mode_from_string(const std::string& s);
std::string to_string(FeatureMode mode);

struct FeatureConfig {
  FeatureMode mode = FeatureMode::LocalFrames;

  int h0_dim(int n_nuc) const { return mode == FeatureMode::DistancesOnly ? n_nuc : 4 * n_nuc; }
  int v0_dim() const { return mode == FeatureMode::DistancesOnly ? 1 : 4; }
  int g0_dim() const { return 1; }
  bool needs_frames() const { return mode == FeatureMode::LocalFrames; }
};

/// Network inputs for a batch of configurations.
/// h0: (n_walkers*n_el, h0_dim) per-electron features, nuclei concatenated in
///     molecule order, each contributing (|rho|, rho in local frame).
/// v0: (n_walkers*n_el*n_nuc, v0_dim) electron-nucleus pair features.
/// g0: (n_walkers*n_el*n_el, 1) electron-electron distances, zero diagonal.
/// rho_norms: (n_walkers*n_el, n_nuc) distances, consumed by the envelopes.
struct FeatureBatch {
  Mat h0;
  Mat v0;
  Mat g0;
  Mat rho_norms;
};

template <class E>
struct FeatureTensors {
  typename E::T h0;
  typename E::T v0;
  typename E::T g0;
  typename E::T rho_e;  // (el_rows, n_nuc)
};

inline Mat nuclei_matrix(const Molecule& mol) {
  Mat r(mol.n_nuc(), 3);
  for (int i = 0; i < mol.n_nuc(); ++i) r.row(i) = mol.nuclei[i].position.transpose();
  return r;
}

/// Single feature-construction path shared by the value and jet engines.
/// `positions` is the engine's view of the (el_rows, 3) coordinates.
template <class E>
FeatureTensors<E> build_feature_tensors(E& eng, const typename E::T& positions,
                                        const Molecule& mol, const FrameSet* frames,
                                        const BatchLayout& lay, const FeatureConfig& cfg) {
  if (cfg.needs_frames() && frames == nullptr)
    throw ConfigError("build_features: local_frames mode requires a FrameSet");
  const Mat nuclei = nuclei_matrix(mol);

  FeatureTensors<E> out;
  auto rho = eng.nuc_diff(positions, nuclei, lay);
  auto rho_n = eng.norm_rows(rho);
  out.rho_e = eng.regroup_nuc(rho_n, lay);

  if (cfg.mode == FeatureMode::DistancesOnly) {
    out.v0 = rho_n;
    out.h0 = out.rho_e;
  } else {
    auto rr = cfg.mode == FeatureMode::LocalFrames ? eng.rotate_local(rho, frames->u, lay)
                                                   : std::move(rho);
    out.v0 = eng.concat_cols({&rho_n, &rr});
    out.h0 = eng.regroup_nuc(out.v0, lay);
  }

  auto pd = eng.pair_diff(positions, lay);
  out.g0 = eng.pair_norm(pd, lay);
  return out;
}

/// Value-level features for a batch of walkers (positions: (n_walkers*n_el, 3)).
FeatureBatch build_features(const Molecule& mol, const FrameSet* frames, const Mat& positions,
                            const FeatureConfig& cfg, int n_walkers = 1);

}  // namespace dlvmc
