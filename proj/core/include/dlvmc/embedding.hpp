#pragma once

#include <string>
#include <vector>

#include "dlvmc/engine.hpp"
#include "dlvmc/errors.hpp"
#include "dlvmc/features.hpp"

namespace dlvmc {

enum class EmbeddingVariant { Combined, FerminetLike, PaulinetLike };

EmbeddingVariant embedding_variant_from_string(const std::string& s);
std::string to_string(EmbeddingVariant v);

struct EmbeddingConfig {
  EmbeddingVariant variant = EmbeddingVariant::Combined;
  int iterations = 4;
  int width_one = 256;
  int width_aux = 32;
  int z_emb_dim = 32;

  // stream composition per variant
  bool conv_kernels() const { return variant != EmbeddingVariant::FerminetLike; }
  bool nuc_stream() const { return variant != EmbeddingVariant::FerminetLike; }
  bool one_electron_features() const { return variant != EmbeddingVariant::PaulinetLike; }
};

struct AffineParams {
  Mat w;  // (out, in)
  Mat b;  // (out, 1)
  bool empty() const { return w.size() == 0; }
  long count() const { return w.size() + b.size(); }
};

/// One embedding iteration: single affine map + tanh per stream.
struct EmbeddingIterParams {
  AffineParams a_one, a_same, a_diff, a_nuc;
  AffineParams b_same, b_diff, b_nuc;
  AffineParams c_same, c_diff, c_nuc;
};

struct EmbeddingParams {
  EmbeddingConfig cfg;
  std::vector<EmbeddingIterParams> iters;
  Mat z_emb;  // (n_nuc, z_emb_dim), trainable per-nucleus embedding
};

/// Stream input widths at iteration l for the given feature dimensions.
struct EmbedDims {
  int h, g, v;
};
EmbedDims embed_dims(const EmbeddingConfig& cfg, const FeatureConfig& fcfg, int n_nuc, int l);
int f_dim(const EmbeddingConfig& cfg, const FeatureConfig& fcfg, int n_nuc, int l);

/// Allocate and initialize: weights ~ N(0, 1/fan_in), biases zero, Z_emb from
/// the same rule with its own width as fan-in.
EmbeddingParams init_embedding_params(const EmbeddingConfig& cfg, const FeatureConfig& fcfg,
                                      int n_nuc, std::uint64_t seed);

long count_embedding_params(const EmbeddingParams& p);

template <class E>
struct BoundAffine {
  typename E::P w, b;
};

template <class E>
struct BoundEmbeddingIter {
  BoundAffine<E> a_one, a_same, a_diff, a_nuc, b_same, b_diff, b_nuc, c_same, c_diff, c_nuc;
};

template <class E>
struct BoundEmbedding {
  std::vector<BoundEmbeddingIter<E>> iters;
  typename E::T z_emb;
  const EmbeddingConfig* cfg = nullptr;
};

template <class E>
BoundAffine<E> bind_affine(E& eng, const AffineParams& p) {
  BoundAffine<E> out;
  if (!p.empty()) {
    out.w = eng.param(p.w);
    out.b = eng.param(p.b);
  }
  return out;
}

template <class E>
BoundEmbedding<E> bind_embedding(E& eng, const EmbeddingParams& p) {
  BoundEmbedding<E> out;
  out.cfg = &p.cfg;
  for (const auto& it : p.iters) {
    BoundEmbeddingIter<E> b;
    b.a_one = bind_affine(eng, it.a_one);
    b.a_same = bind_affine(eng, it.a_same);
    b.a_diff = bind_affine(eng, it.a_diff);
    b.a_nuc = bind_affine(eng, it.a_nuc);
    b.b_same = bind_affine(eng, it.b_same);
    b.b_diff = bind_affine(eng, it.b_diff);
    b.b_nuc = bind_affine(eng, it.b_nuc);
    b.c_same = bind_affine(eng, it.c_same);
    b.c_diff = bind_affine(eng, it.c_diff);
    b.c_nuc = bind_affine(eng, it.c_nuc);
    out.iters.push_back(b);
  }
  if (p.z_emb.size() > 0) out.z_emb = eng.input_param(p.z_emb);
  return out;
}

/// L iterations of the embedding network. Auxiliary two-particle streams feed
/// the one-electron stream through spin-resolved means plus convolution-like
/// sums; residual connections apply whenever input and output widths match.
template <class E>
typename E::T embed(E& eng, const BoundEmbedding<E>& p, const FeatureTensors<E>& feats,
                    const BatchLayout& lay) {
  using T = typename E::T;
  const EmbeddingConfig& cfg = *p.cfg;
  const int L = cfg.iterations;
  if (static_cast<int>(p.iters.size()) != L)
    throw ConfigError("embed: parameter iteration count does not match config");

  T h = feats.h0;
  T g = feats.g0;
  T v = feats.v0;

  for (int l = 0; l < L; ++l) {
    const auto& it = p.iters[l];

    // symmetric features f_i from the current streams
    T s_el, s_nuc;
    if (cfg.conv_kernels()) {
      T gb_same = eng.tanh_(eng.affine(it.b_same.w, it.b_same.b, g));
      T gb_diff = eng.tanh_(eng.affine(it.b_diff.w, it.b_diff.b, g));
      T hc_same = eng.tanh_(eng.affine(it.c_same.w, it.c_same.b, h));
      T hc_diff = eng.tanh_(eng.affine(it.c_diff.w, it.c_diff.b, h));
      s_el = eng.pair_mix(gb_same, gb_diff, hc_same, hc_diff, lay);
    } else {
      s_el = eng.pair_sum(g, lay);  // B = Id, C = 1
    }
    if (cfg.nuc_stream()) {
      T vb = eng.tanh_(eng.affine(it.b_nuc.w, it.b_nuc.b, v));
      T zc = eng.tanh_(eng.affine(it.c_nuc.w, it.c_nuc.b, p.z_emb));
      s_nuc = eng.nuc_convolve(vb, zc, lay);
    }

    T f;
    if (cfg.one_electron_features()) {
      T mu = eng.spin_mean(h, lay, 0);
      T md = eng.spin_mean(h, lay, 1);
      if (cfg.nuc_stream())
        f = eng.concat_cols({&h, &mu, &md, &s_el, &s_nuc});
      else
        f = eng.concat_cols({&h, &mu, &md, &s_el});
    } else {
      f = eng.concat_cols({&s_el, &s_nuc});
    }

    // residual stream updates; residual only when widths already match
    T h_new = eng.tanh_(eng.affine(it.a_one.w, it.a_one.b, f));
    h = eng.cols(h) == cfg.width_one ? eng.add(h_new, h) : std::move(h_new);

    T g_same = eng.tanh_(eng.affine(it.a_same.w, it.a_same.b, g));
    T g_diff = eng.tanh_(eng.affine(it.a_diff.w, it.a_diff.b, g));
    T g_new = eng.pair_select(g_same, g_diff, lay);
    g = eng.cols(g) == cfg.width_aux ? eng.add(g_new, g) : std::move(g_new);

    if (cfg.nuc_stream()) {
      T v_new = eng.tanh_(eng.affine(it.a_nuc.w, it.a_nuc.b, v));
      v = eng.cols(v) == cfg.width_aux ? eng.add(v_new, v) : std::move(v_new);
    }
  }
  return h;
}

}  // namespace dlvmc
