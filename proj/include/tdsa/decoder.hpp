#pragma once

#include <vector>

#include "tdsa/nn.hpp"
#include "tdsa/rng.hpp"
#include "tdsa/tensor.hpp"

namespace tdsa {

struct DecoderBlockParams {
  LayerNormParams ln_self, ln_cross, ln_ffn;
  LinearParams sq, sk, sv, so;  // causal self-attention
  LinearParams cq, ck, cv, co;  // cross-attention over slots
  MlpParams ffn;                // width -> 4*width -> width
};

struct DecoderParams {
  std::vector<DecoderBlockParams> blocks;
  LinearParams slot_proj;  // d_slots -> width
  Tensor bos;              // 1 x width, learnable [BOS] token
  Tensor pos;              // N x width, learned positional embeddings
  LayerNormParams final_norm;
  LinearParams head;  // width -> width
  long heads = 8;
  long width = 0;  // = d_feat
};

DecoderParams init_decoder(Rng& rng, long d_feat, long d_slots,
                           long n_positions, long blocks, long heads);

struct DecoderOutput {
  Tensor recon;  // N x d_feat, recon[n] predicts x[n]
  // per block, per head: N x K attention over slots (rows sum to 1)
  std::vector<std::vector<Tensor>> cross_attn;
};

// Teacher-forced reconstruction: input sequence is [BOS; x_0..x_{N-2}] plus
// positional embeddings; slots serve as cross-attention keys/values.
DecoderOutput decode(Graph& g, const DecoderParams& p, const Tensor& x,
                     const Tensor& slots);

struct MaskExtraction {
  std::vector<double> soft;  // K x N, per-position distribution over slots
  std::vector<int> labels;   // N, argmax slot (ties -> lowest index)
  long k_slots = 0, n = 0;
};

MaskExtraction extract_masks(const DecoderOutput& out,
                             bool last_block_only = false);

}  // namespace tdsa
