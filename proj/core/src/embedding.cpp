#include "dlvmc/embedding.hpp"

#include "dlvmc/rng.hpp"

namespace dlvmc {

EmbeddingVariant embedding_variant_from_string(const std::string& s) {
  if (s == "combined") return EmbeddingVariant::Combined;
  if (s == "ferminet_like") return EmbeddingVariant::FerminetLike;
  if (s == "paulinet_like") return EmbeddingVariant::PaulinetLike;
  throw ConfigError("unknown embedding variant: " + s);
}

std::string to_string(EmbeddingVariant v) {
  switch (v) {
    case EmbeddingVariant::Combined: return "combined";
    case EmbeddingVariant::FerminetLike: return "ferminet_like";
    case EmbeddingVariant::PaulinetLike: return "paulinet_like";
  }
  return "?";
}

EmbedDims embed_dims(const EmbeddingConfig& cfg, const FeatureConfig& fcfg, int n_nuc, int l) {
  EmbedDims d;
  d.h = l == 0 ? fcfg.h0_dim(n_nuc) : cfg.width_one;
  d.g = l == 0 ? fcfg.g0_dim() : cfg.width_aux;
  d.v = l == 0 ? fcfg.v0_dim() : cfg.width_aux;
  return d;
}

int f_dim(const EmbeddingConfig& cfg, const FeatureConfig& fcfg, int n_nuc, int l) {
  const EmbedDims d = embed_dims(cfg, fcfg, n_nuc, l);
  const int s_el = cfg.conv_kernels() ? cfg.width_aux : d.g;
  if (!cfg.one_electron_features()) return s_el + cfg.width_aux;
  return 3 * d.h + s_el + (cfg.nuc_stream() ? cfg.width_aux : 0);
}

namespace {

struct InitCtx {
  std::uint64_t seed;
  std::uint64_t counter = 0;
};

AffineParams init_affine(InitCtx& ctx, int out, int in) {
  AffineParams p;
  p.w.resize(out, in);
  const double std_dev = 1.0 / std::sqrt(double(in));
  const std::uint64_t id = ctx.counter++;
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c)
      p.w(r, c) = std_dev * rng_gaussian(ctx.seed, RngStream::ParamInit, id,
                                         std::uint64_t(r), std::uint64_t(c));
  p.b = Mat::Zero(out, 1);
  ctx.counter++;  // reserve a slot so bias-bearing layouts stay stable
  return p;
}

}  // namespace

EmbeddingParams init_embedding_params(const EmbeddingConfig& cfg, const FeatureConfig& fcfg,
                                      int n_nuc, std::uint64_t seed) {
  EmbeddingParams p;
  p.cfg = cfg;
  InitCtx ctx{seed};
  for (int l = 0; l < cfg.iterations; ++l) {
    const EmbedDims d = embed_dims(cfg, fcfg, n_nuc, l);
    EmbeddingIterParams it;
    it.a_one = init_affine(ctx, cfg.width_one, f_dim(cfg, fcfg, n_nuc, l));
    it.a_same = init_affine(ctx, cfg.width_aux, d.g);
    it.a_diff = init_affine(ctx, cfg.width_aux, d.g);
    if (cfg.nuc_stream()) it.a_nuc = init_affine(ctx, cfg.width_aux, d.v);
    if (cfg.conv_kernels()) {
      it.b_same = init_affine(ctx, cfg.width_aux, d.g);
      it.b_diff = init_affine(ctx, cfg.width_aux, d.g);
      it.c_same = init_affine(ctx, cfg.width_aux, d.h);
      it.c_diff = init_affine(ctx, cfg.width_aux, d.h);
    }
    if (cfg.nuc_stream()) {
      it.b_nuc = init_affine(ctx, cfg.width_aux, d.v);
      it.c_nuc = init_affine(ctx, cfg.width_aux, cfg.z_emb_dim);
    }
    p.iters.push_back(std::move(it));
  }
  if (cfg.nuc_stream()) {
    p.z_emb.resize(n_nuc, cfg.z_emb_dim);
    const double std_dev = 1.0 / std::sqrt(double(cfg.z_emb_dim));
    const std::uint64_t id = ctx.counter++;
    for (int r = 0; r < n_nuc; ++r)
      for (int c = 0; c < cfg.z_emb_dim; ++c)
        p.z_emb(r, c) = std_dev * rng_gaussian(seed, RngStream::ParamInit, id,
                                               std::uint64_t(r), std::uint64_t(c));
  }
  return p;
}

long count_embedding_params(const EmbeddingParams& p) {
  long n = 0;
  for (const auto& it : p.iters) {
    for (const AffineParams* a : {&it.a_one, &it.a_same, &it.a_diff, &it.a_nuc, &it.b_same,
                                  &it.b_diff, &it.b_nuc, &it.c_same, &it.c_diff, &it.c_nuc})
      n += a->count();
  }
  n += p.z_emb.size();
  return n;
}

}  // namespace dlvmc
