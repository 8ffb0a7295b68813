#include "dlvmc/features.hpp"

namespace dlvmc {

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "local_frames") return FeatureMode::LocalFrames;
  if (s == "raw_diffs") return FeatureMode::RawDiffs;
  if (s == "distances_only") return FeatureMode::DistancesOnly;
  throw ConfigError("unknown feature mode: " + s);
}

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::LocalFrames: return "local_frames";
    case FeatureMode::RawDiffs: return "raw_diffs";
    case FeatureMode::DistancesOnly: return "distances_only";
  }
  return "?";
}

FeatureBatch build_features(const Molecule& mol, const FrameSet* frames, const Mat& positions,
                            const FeatureConfig& cfg, int n_walkers) {
  BatchLayout lay{n_walkers, mol.n_el, mol.n_up, mol.n_nuc()};
  ValueEngine eng;
  auto t = build_feature_tensors(eng, positions, mol, frames, lay, cfg);
  return FeatureBatch{std::move(t.h0), std::move(t.v0), std::move(t.g0), std::move(t.rho_e)};
}

}  // namespace dlvmc
