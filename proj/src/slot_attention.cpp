#include "tdsa/slot_attention.hpp"

#include <cmath>
#include <stdexcept>

namespace tdsa {

SlotAttentionParams init_slot_attention(Rng& rng, long d_feat, long d) {
  SlotAttentionParams p;
  p.d = d;
  p.adapter = init_linear(rng, d_feat, d);
  p.input_norm = init_layer_norm(d);
  p.q = init_linear(rng, d, d);
  p.k = init_linear(rng, d, d);
  p.v = init_linear(rng, d, d);
  p.slot_norm = init_layer_norm(d);
  p.pre_mlp_norm = init_layer_norm(d);
  p.gru = init_gru(rng, d, d);
  p.update_mlp = init_mlp(rng, d, d, d);
  p.mu = make_tensor({d}, true);
  p.log_sigma = make_tensor({d}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(2 * d));
  for (double& x : *p.mu->val) x = rng.uniform(-limit, limit);
  for (double& x : *p.log_sigma->val) x = rng.uniform(-limit, limit);
  return p;
}

Tensor init_slots(Graph& g, const SlotAttentionParams& p, long k_slots,
                  Rng& rng) {
  if (k_slots < 1)
    throw std::invalid_argument("init_slots: slot count must be >= 1");
  Tensor eps = make_tensor({k_slots, p.d}, false);
  for (double& x : *eps->val) x = rng.normal();
  Tensor sigma = g.exp(p.log_sigma);
  return g.add_rowvec(g.mul_rowvec(eps, sigma), p.mu);
}

Tensor encode_input(Graph& g, const SlotAttentionParams& p, const Tensor& x) {
  if (x->shape.empty() || x->shape[0] == 0)
    throw std::invalid_argument("encode_input: empty feature grid");
  Tensor h = g.linear(x, p.adapter.w, p.adapter.b);
  return g.layer_norm(h, p.input_norm.gamma, p.input_norm.beta);
}

EncodedFeatures project_features(Graph& g, const SlotAttentionParams& p,
                                 const Tensor& h) {
  return EncodedFeatures{g.linear(h, p.k.w, p.k.b), g.linear(h, p.v.w, p.v.b)};
}

AttentionStep attention_step(Graph& g, const SlotAttentionParams& p,
                             const EncodedFeatures& feats, const Tensor& slots,
                             const Tensor* mod_map) {
  AttentionStep step;
  Tensor sn = g.layer_norm(slots, p.slot_norm.gamma, p.slot_norm.beta);
  Tensor query = g.linear(sn, p.q.w, p.q.b);
  Tensor logits = g.scale(g.matmul_nt(query, feats.keys),
                          1.0 / std::sqrt(static_cast<double>(p.d)));
  step.attn = g.softmax(logits, 0);  // normalized across the slots
  Tensor row_sums = g.add_scalar(g.sum_axis(step.attn, 1), 1e-30);
  step.attn_rows = g.div_colvec(step.attn, row_sums);
  step.update = mod_map
                    ? g.modulated_sum(step.attn_rows, *mod_map, feats.values)
                    : g.matmul(step.attn_rows, feats.values);
  return step;
}

Tensor slot_update(Graph& g, const SlotAttentionParams& p, const Tensor& update,
                   const Tensor& prev_slots) {
  Tensor s = g.gru_cell(update, prev_slots, p.gru);
  Tensor sn = g.layer_norm(s, p.pre_mlp_norm.gamma, p.pre_mlp_norm.beta);
  return g.add(s, mlp_forward(g, p.update_mlp, sn));
}

namespace {

SlotPass run_pass(Graph& g, const SlotAttentionParams& p, const Tensor& h,
                  const Tensor& s0, const Tensor* mod_map, long iters) {
  if (iters < 1) throw std::invalid_argument("slot attention: iters must be >= 1");
  EncodedFeatures feats = project_features(g, p, h);
  SlotPass pass;
  Tensor slots = s0;
  for (long t = 0; t < iters; ++t) {
    AttentionStep step = attention_step(g, p, feats, slots, mod_map);
    slots = slot_update(g, p, step.update, slots);
    pass.attn = step.attn;
    pass.attn_rows = step.attn_rows;
  }
  pass.slots = slots;
  return pass;
}

}  // namespace

SlotPass run_bottom_up(Graph& g, const SlotAttentionParams& p, const Tensor& h,
                       const Tensor& s0, long iters) {
  return run_pass(g, p, h, s0, nullptr, iters);
}

SlotPass run_modulated(Graph& g, const SlotAttentionParams& p, const Tensor& h,
                       const Tensor& s0, const Tensor& mod_map, long iters) {
  if (mod_map->shape.size() != 3)
    throw std::invalid_argument("run_modulated: modulation map must be 3-d, got " +
                                shape_str(mod_map->shape));
  return run_pass(g, p, h, s0, &mod_map, iters);
}

}  // namespace tdsa
