#include "tdsa/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace tdsa {

namespace {

constexpr double kMaskedOut = -1e30;

DecoderBlockParams init_block(Rng& rng, long w) {
  DecoderBlockParams b;
  b.ln_self = init_layer_norm(w);
  b.ln_cross = init_layer_norm(w);
  b.ln_ffn = init_layer_norm(w);
  b.sq = init_linear(rng, w, w);
  b.sk = init_linear(rng, w, w);
  b.sv = init_linear(rng, w, w);
  b.so = init_linear(rng, w, w);
  b.cq = init_linear(rng, w, w);
  b.ck = init_linear(rng, w, w);
  b.cv = init_linear(rng, w, w);
  b.co = init_linear(rng, w, w);
  b.ffn = init_mlp(rng, w, 4 * w, w);
  return b;
}

// Multi-head attention with per-head softmax over the key axis. Returns the
// residual branch output; saves per-head attention maps when requested.
Tensor mha(Graph& g, const Tensor& q_in, const Tensor& kv_in,
           const LinearParams& wq, const LinearParams& wk,
           const LinearParams& wv, const LinearParams& wo, long heads,
           const Tensor* mask, std::vector<Tensor>* attn_out) {
  const long w = wq.w->shape[0];
  const long dh = w / heads;
  Tensor q = g.linear(q_in, wq.w, wq.b);
  Tensor k = g.linear(kv_in, wk.w, wk.b);
  Tensor v = g.linear(kv_in, wv.w, wv.b);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (long h = 0; h < heads; ++h) {
    Tensor qh = g.slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = g.slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = g.slice_cols(v, h * dh, (h + 1) * dh);
    Tensor logits = g.scale(g.matmul_nt(qh, kh), inv_sqrt);
    if (mask) logits = g.add(logits, *mask);
    Tensor attn = g.softmax(logits, 1);
    if (attn_out) attn_out->push_back(attn);
    outs.push_back(g.matmul(attn, vh));
  }
  return g.linear(g.concat_cols(outs), wo.w, wo.b);
}

}  // namespace

DecoderParams init_decoder(Rng& rng, long d_feat, long d_slots,
                           long n_positions, long blocks, long heads) {
  if (d_feat % heads != 0)
    throw std::invalid_argument("init_decoder: width " + std::to_string(d_feat) +
                                " not divisible by " + std::to_string(heads) +
                                " heads");
  DecoderParams p;
  p.width = d_feat;
  p.heads = heads;
  for (long i = 0; i < blocks; ++i) p.blocks.push_back(init_block(rng, d_feat));
  p.slot_proj = init_linear(rng, d_slots, d_feat);
  p.bos = make_tensor({1, d_feat}, true);
  for (double& x : *p.bos->val) x = 0.02 * rng.normal();
  p.pos = make_tensor({n_positions, d_feat}, true);
  for (double& x : *p.pos->val) x = 0.02 * rng.normal();
  p.final_norm = init_layer_norm(d_feat);
  p.head = init_linear(rng, d_feat, d_feat);
  return p;
}

DecoderOutput decode(Graph& g, const DecoderParams& p, const Tensor& x,
                     const Tensor& slots) {
  const long n = x->shape.empty() ? 0 : x->shape[0];
  if (n == 0) throw std::invalid_argument("decode: empty feature sequence");
  if (x->shape[1] != p.width)
    throw std::invalid_argument("decode: feature dim " + shape_str(x->shape) +
                                " does not match decoder width " +
                                std::to_string(p.width));
  if (p.pos->shape[0] != n)
    throw std::invalid_argument(
        "decode: positional table built for " + std::to_string(p.pos->shape[0]) +
        " positions, got " + std::to_string(n));

  // causal mask: position i may look at inputs 0..i
  Tensor mask = make_tensor({n, n}, false);
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) mask->v()[i * n + j] = kMaskedOut;

  Tensor shifted = g.concat_rows(p.bos, g.slice_rows(x, 0, n - 1));
  Tensor z = g.add(shifted, p.pos);
  Tensor slots_kv = g.linear(slots, p.slot_proj.w, p.slot_proj.b);

  DecoderOutput out;
  out.cross_attn.resize(p.blocks.size());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const DecoderBlockParams& blk = p.blocks[b];
    Tensor hs = g.layer_norm(z, blk.ln_self.gamma, blk.ln_self.beta);
    z = g.add(z, mha(g, hs, hs, blk.sq, blk.sk, blk.sv, blk.so, p.heads, &mask,
                     nullptr));
    Tensor hc = g.layer_norm(z, blk.ln_cross.gamma, blk.ln_cross.beta);
    z = g.add(z, mha(g, hc, slots_kv, blk.cq, blk.ck, blk.cv, blk.co, p.heads,
                     nullptr, &out.cross_attn[b]));
    Tensor hf = g.layer_norm(z, blk.ln_ffn.gamma, blk.ln_ffn.beta);
    z = g.add(z, mlp_forward(g, blk.ffn, hf, /*use_gelu=*/true));
  }
  Tensor zn = g.layer_norm(z, p.final_norm.gamma, p.final_norm.beta);
  out.recon = g.linear(zn, p.head.w, p.head.b);
  return out;
}

MaskExtraction extract_masks(const DecoderOutput& out, bool last_block_only) {
  if (out.cross_attn.empty() || out.cross_attn[0].empty())
    throw std::invalid_argument("extract_masks: no cross-attention maps");
  const Tensor& first = out.cross_attn[0][0];
  const long n = first->shape[0], k_slots = first->shape[1];
  MaskExtraction m;
  m.k_slots = k_slots;
  m.n = n;
  m.soft.assign(k_slots * n, 0.0);
  const std::size_t b0 = last_block_only ? out.cross_attn.size() - 1 : 0;
  long maps = 0;
  for (std::size_t b = b0; b < out.cross_attn.size(); ++b)
    for (const Tensor& a : out.cross_attn[b]) {
      for (long i = 0; i < n; ++i)
        for (long k = 0; k < k_slots; ++k)
          m.soft[k * n + i] += a->v()[i * k_slots + k];
      ++maps;
    }
  for (double& v : m.soft) v /= static_cast<double>(maps);
  m.labels.assign(n, 0);
  for (long i = 0; i < n; ++i) {
    long best = 0;
    for (long k = 1; k < k_slots; ++k)
      if (m.soft[k * n + i] > m.soft[best * n + i]) best = k;
    m.labels[i] = static_cast<int>(best);
  }
  return m;
}

}  // namespace tdsa
