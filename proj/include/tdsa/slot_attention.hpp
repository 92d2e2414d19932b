#pragma once

#include "tdsa/nn.hpp"
#include "tdsa/rng.hpp"
#include "tdsa/tensor.hpp"

namespace tdsa {

// One parameter set serves both attention passes; the modulated pass reads
// the same instance.
struct SlotAttentionParams {
  LinearParams adapter;  // d_feat -> d
  LayerNormParams input_norm;
  LinearParams q, k, v;  // d -> d
  LayerNormParams slot_norm, pre_mlp_norm;
  GruWeights gru;        // input d -> hidden d
  MlpParams update_mlp;  // d -> d, hidden d
  Tensor mu, log_sigma;  // d
  long d = 0;
};

SlotAttentionParams init_slot_attention(Rng& rng, long d_feat, long d);

// slots = mu + exp(log_sigma) (.) eps, eps ~ N(0, I), per slot.
Tensor init_slots(Graph& g, const SlotAttentionParams& p, long k_slots,
                  Rng& rng);

// adapter + input layer norm, applied once per forward.
Tensor encode_input(Graph& g, const SlotAttentionParams& p, const Tensor& x);

struct EncodedFeatures {
  Tensor keys;    // N x d
  Tensor values;  // N x d
};

// k/v projections of the encoded input; recomputed per pass so both passes
// have identical structure.
EncodedFeatures project_features(Graph& g, const SlotAttentionParams& p,
                                 const Tensor& h);

struct AttentionStep {
  Tensor attn;       // A, K x N, each column sums to 1 (competition axis)
  Tensor attn_rows;  // A-tilde, K x N, each row sums to 1
  Tensor update;     // U, K x d
};

// One attention round. When mod_map is non-null the update uses
// u_k = A~_k (M_k (.) v(x)) instead of U = A~ v(x).
AttentionStep attention_step(Graph& g, const SlotAttentionParams& p,
                             const EncodedFeatures& feats, const Tensor& slots,
                             const Tensor* mod_map = nullptr);

// GRU + residual MLP on a layer-normed input.
Tensor slot_update(Graph& g, const SlotAttentionParams& p, const Tensor& update,
                   const Tensor& prev_slots);

struct SlotPass {
  Tensor slots;      // S^T, K x d
  Tensor attn;       // final-iteration A
  Tensor attn_rows;  // final-iteration A-tilde
};

SlotPass run_bottom_up(Graph& g, const SlotAttentionParams& p, const Tensor& h,
                       const Tensor& s0, long iters);

// Same loop with a fixed modulation map applied to the value features in
// every iteration.
SlotPass run_modulated(Graph& g, const SlotAttentionParams& p, const Tensor& h,
                       const Tensor& s0, const Tensor& mod_map, long iters);

}  // namespace tdsa
