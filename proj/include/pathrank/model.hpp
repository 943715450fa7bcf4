#pragma once

#include <map>
#include <string>
#include <vector>

#include "pathrank/featurize.hpp"
#include "pathrank/params.hpp"
#include "pathrank/tape.hpp"

namespace pathrank {

struct ModelConfig {
  int hidden = 64;
  int n_lang_layers = 4;
  int n_vis_layers = 2;
  int n_coattn_layers = 2;
  int n_heads = 4;
  int vocab_size = 0;
  int d_v = 64;
  int k_max = 8;
  int n_max = 7;
  int l_max = 60;
  int n_landmark_classes = 20;
  double dropout_rate = 0.0;  // present but disabled by default

  // 12-layer streams with 6 cross-modal layers; constructible, not trained in CI
  static ModelConfig paper_scale(int vocab, int classes) {
    ModelConfig c;
    c.hidden = 768;
    c.n_lang_layers = 12;
    c.n_vis_layers = 12;
    c.n_coattn_layers = 6;
    c.n_heads = 12;
    c.vocab_size = vocab;
    c.d_v = 2048;
    c.k_max = 100;
    c.n_max = 7;
    c.l_max = 60;
    c.n_landmark_classes = classes;
    return c;
  }

  void validate() const {
    if (hidden % n_heads != 0) throw std::invalid_argument("hidden not divisible by n_heads");
    if (vocab_size <= 0) throw std::invalid_argument("vocab_size not set");
  }
};

namespace modelnames {
inline std::string layer(const std::string& stream, int i, const std::string& rest) {
  return stream + ".L" + std::to_string(i) + "." + rest;
}
}  // namespace modelnames

template <class S>
inline ParamStore<S> init_model_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamStore<S> ps;
  std::mt19937_64 rng(seed);
  const int H = cfg.hidden, F = 4 * cfg.hidden;
  auto dense = [&](const std::string& name, int in, int out) {
    init_trunc_normal(ps.add(name + ".W", {in, out}), rng);
    ps.add(name + ".b", {out});  // zeros
  };
  auto ln = [&](const std::string& name) {
    auto& g = ps.add(name + ".gamma", {H});
    std::fill(g.data.begin(), g.data.end(), S(1));
    ps.add(name + ".beta", {H});
  };
  auto block = [&](const std::string& p) {  // self/cross-attn + FFN block params
    dense(p + ".attn.q", H, H);
    dense(p + ".attn.k", H, H);
    dense(p + ".attn.v", H, H);
    dense(p + ".attn.o", H, H);
    ln(p + ".ln1");
    dense(p + ".ffn.in", H, F);
    dense(p + ".ffn.out", F, H);
    ln(p + ".ln2");
  };

  init_trunc_normal(ps.add("text.word_emb", {cfg.vocab_size, H}), rng);
  init_trunc_normal(ps.add("text.pos_emb", {cfg.l_max + 2, H}), rng);
  ln("text.ln_emb");
  init_trunc_normal(ps.add("vis.W_v", {cfg.d_v, H}), rng);
  init_trunc_normal(ps.add("vis.W_S", {11, H}), rng);
  init_trunc_normal(ps.add("vis.W_P", {cfg.n_max, H}), rng);
  init_trunc_normal(ps.add("vis.type_emb", {2, H}), rng);  // row 1 = IMG marker
  ln("vis.ln_emb");

  for (int i = 0; i < cfg.n_lang_layers; ++i) block(modelnames::layer("text", i, "self"));
  for (int i = 0; i < cfg.n_vis_layers; ++i) block(modelnames::layer("vis", i, "self"));
  for (int i = 0; i < cfg.n_coattn_layers; ++i) {
    block(modelnames::layer("co", i, "t2v"));  // text queries over visual keys
    block(modelnames::layer("co", i, "v2t"));  // visual queries over text keys
  }

  init_trunc_normal(ps.add("head.score.W", {H, 1}), rng);  // no bias (Eq-style pooling)
  dense("head.mlm", H, cfg.vocab_size);
  dense("head.region", H, cfg.n_landmark_classes);
  dense("head.align", H, 1);
  return ps;
}

// Refs into one tape for a single forward pass.
template <class S>
struct ForwardRefs {
  using Ref = typename Tape<S>::Ref;
  std::map<std::string, Ref> param_refs;
  Ref features = -1;  // [T_v x d_v] leaf, IMG rows zero (for attribution)
  Ref h_text = -1;    // [T_t x H]
  Ref h_vis = -1;     // [T_v x H]
  Ref h_cls = -1;     // [1 x H]
  Ref h_img = -1;     // [1 x H] first IMG token
  int text_len = 0;   // attended prefix (rest is padding)
};

template <class S>
class ModelRunner {
 public:
  using Ref = typename Tape<S>::Ref;

  ModelRunner(const ModelConfig& cfg, const ParamStore<S>& params)
      : cfg_(cfg), params_(params) {
    cfg_.validate();
  }

  const ModelConfig& config() const { return cfg_; }

  // text_len: number of non-padding text tokens (<=0 means all)
  ForwardRefs<S> forward(Tape<S>& t, const MultimodalSequence& seq, int text_len = 0,
                         bool features_require_grad = false) const {
    ForwardRefs<S> fr;
    const int H = cfg_.hidden;
    const int Tt = static_cast<int>(seq.text.size());
    const int Tv = static_cast<int>(seq.visual.size());
    if (Tt > cfg_.l_max + 2) throw std::length_error("forward: text exceeds L_max");
    fr.text_len = (text_len <= 0 || text_len > Tt) ? Tt : text_len;

    auto P = [&](const std::string& name) -> Ref {
      auto it = fr.param_refs.find(name);
      if (it != fr.param_refs.end()) return it->second;
      Ref r = t.leaf(params_.at(name), true);
      fr.param_refs.emplace(name, r);
      return r;
    };

    // --- text embedding
    std::vector<int> pos_ids(static_cast<size_t>(Tt));
    for (int i = 0; i < Tt; ++i) pos_ids[static_cast<size_t>(i)] = i;
    Ref x_text = t.add(t.embedding_lookup(P("text.word_emb"), seq.text),
                       t.embedding_lookup(P("text.pos_emb"), pos_ids));
    x_text = t.layernorm(x_text, P("text.ln_emb.gamma"), P("text.ln_emb.beta"));

    // --- visual embedding
    Arr<S> feats({Tv, cfg_.d_v});
    Arr<S> spatial({Tv, 11});
    std::vector<int> pano_ids(static_cast<size_t>(Tv)), type_ids(static_cast<size_t>(Tv));
    for (int i = 0; i < Tv; ++i) {
      const VisualToken& vt = seq.visual[static_cast<size_t>(i)];
      pano_ids[static_cast<size_t>(i)] = vt.pano_index;
      type_ids[static_cast<size_t>(i)] = vt.is_img ? 1 : 0;
      if (!vt.is_img) {
        if (static_cast<int>(vt.feature.size()) != cfg_.d_v)
          throw std::invalid_argument("forward: region feature dim != d_v");
        for (int c = 0; c < cfg_.d_v; ++c) feats.at(i, c) = static_cast<S>(vt.feature[c]);
        for (int c = 0; c < 11; ++c) spatial.at(i, c) = static_cast<S>(vt.spatial[c]);
      }
    }
    fr.features = t.leaf(std::move(feats), features_require_grad);
    Ref sp = t.leaf(std::move(spatial), false);
    Ref x_vis = t.add(t.add(t.matmul(fr.features, P("vis.W_v")), t.matmul(sp, P("vis.W_S"))),
                      t.add(t.embedding_lookup(P("vis.W_P"), pano_ids),
                            t.embedding_lookup(P("vis.type_emb"), type_ids)));
    x_vis = t.layernorm(x_vis, P("vis.ln_emb.gamma"), P("vis.ln_emb.beta"));

    // attention mask over text keys (padding)
    Ref text_key_mask_tt = text_mask(t, Tt, Tt, fr.text_len);
    Ref text_key_mask_vt = text_mask(t, Tv, Tt, fr.text_len);

    for (int i = 0; i < cfg_.n_lang_layers; ++i)
      x_text = block(t, P, modelnames::layer("text", i, "self"), x_text, x_text, text_key_mask_tt);
    for (int i = 0; i < cfg_.n_vis_layers; ++i)
      x_vis = block(t, P, modelnames::layer("vis", i, "self"), x_vis, x_vis, -1);
    for (int i = 0; i < cfg_.n_coattn_layers; ++i) {
      Ref nt = block(t, P, modelnames::layer("co", i, "t2v"), x_text, x_vis, -1);
      Ref nv = block(t, P, modelnames::layer("co", i, "v2t"), x_vis, x_text, text_key_mask_vt);
      x_text = nt;
      x_vis = nv;
    }

    fr.h_text = x_text;
    fr.h_vis = x_vis;
    fr.h_cls = t.slice_rows(x_text, 0, 1);
    fr.h_img = t.slice_rows(x_vis, 0, 1);
    return fr;
  }

  // s = W (h_CLS elementwise* h_IMG), scalar
  Ref compatibility_score(Tape<S>& t, ForwardRefs<S>& fr) const {
    return t.matmul(t.mul(fr.h_cls, fr.h_img), get(t, fr, "head.score.W"));
  }

  Ref head_masked_lm(Tape<S>& t, ForwardRefs<S>& fr, Ref h_tokens) const {
    return t.add_bias_rows(t.matmul(h_tokens, get(t, fr, "head.mlm.W")), get(t, fr, "head.mlm.b"));
  }

  Ref head_masked_region(Tape<S>& t, ForwardRefs<S>& fr, Ref h_regions) const {
    return t.add_bias_rows(t.matmul(h_regions, get(t, fr, "head.region.W")),
                           get(t, fr, "head.region.b"));
  }

  Ref head_alignment(Tape<S>& t, ForwardRefs<S>& fr) const {
    return t.add_bias_rows(t.matmul(t.mul(fr.h_cls, fr.h_img), get(t, fr, "head.align.W")),
                           get(t, fr, "head.align.b"));
  }

  S score_value(const MultimodalSequence& seq) const {
    Tape<S> t;
    ForwardRefs<S> fr = forward(t, seq);
    return t.val(compatibility_score(t, fr)).at(0);
  }

 private:
  ModelConfig cfg_;
  const ParamStore<S>& params_;

  Ref get(Tape<S>& t, ForwardRefs<S>& fr, const std::string& name) const {
    auto it = fr.param_refs.find(name);
    if (it != fr.param_refs.end()) return it->second;
    Ref r = t.leaf(params_.at(name), true);
    fr.param_refs.emplace(name, r);
    return r;
  }

  // additive mask [rows x key_len]: 0 for attended keys, -1e9 for padding
  Ref text_mask(Tape<S>& t, int rows, int key_len, int valid) const {
    Arr<S> m({rows, key_len});
    if (valid < key_len)
      for (int r = 0; r < rows; ++r)
        for (int c = valid; c < key_len; ++c) m.at(r, c) = S(-1e9);
    return t.leaf(std::move(m), false);
  }

  // post-LN transformer block: multi-head attention (queries from x, keys and
  // values from kv) with residual, then FFN with residual
  template <class PF>
  Ref block(Tape<S>& t, PF& P, const std::string& p, Ref x, Ref kv, Ref key_mask) const {
    const int H = cfg_.hidden, nh = cfg_.n_heads, dh = H / nh;
    Ref q = t.add_bias_rows(t.matmul(x, P(p + ".attn.q.W")), P(p + ".attn.q.b"));
    Ref k = t.add_bias_rows(t.matmul(kv, P(p + ".attn.k.W")), P(p + ".attn.k.b"));
    Ref v = t.add_bias_rows(t.matmul(kv, P(p + ".attn.v.W")), P(p + ".attn.v.b"));
    std::vector<Ref> heads;
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));
    for (int h = 0; h < nh; ++h) {
      Ref qh = t.slice_cols(q, h * dh, (h + 1) * dh);
      Ref kh = t.slice_cols(k, h * dh, (h + 1) * dh);
      Ref vh = t.slice_cols(v, h * dh, (h + 1) * dh);
      Ref scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
      if (key_mask >= 0) scores = t.add(scores, key_mask);
      heads.push_back(t.matmul(t.softmax(scores), vh));
    }
    Ref ctx = t.add_bias_rows(t.matmul(t.concat_cols(heads), P(p + ".attn.o.W")),
                              P(p + ".attn.o.b"));
    Ref h1 = t.layernorm(t.add(x, ctx), P(p + ".ln1.gamma"), P(p + ".ln1.beta"));
    Ref f = t.add_bias_rows(t.matmul(h1, P(p + ".ffn.in.W")), P(p + ".ffn.in.b"));
    f = t.gelu(f);
    f = t.add_bias_rows(t.matmul(f, P(p + ".ffn.out.W")), P(p + ".ffn.out.b"));
    return t.layernorm(t.add(h1, f), P(p + ".ln2.gamma"), P(p + ".ln2.beta"));
  }
};

}  // namespace pathrank
