#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tdsa/config.hpp"
#include "tdsa/decoder.hpp"
#include "tdsa/nn.hpp"
#include "tdsa/pathway.hpp"
#include "tdsa/slot_attention.hpp"

namespace tdsa {

struct ModelParams {
  SlotAttentionParams sa;
  CodebookParams codebook;
  MlpParams mod_mlp;  // channel-wise modulation MLP, d -> d
  DecoderParams dec;
};

ModelParams init_model(const TrainConfig& cfg);

// Stable-order registry of every learnable tensor; serves the optimizer,
// checkpointing, aliasing and gradient reduction.
std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelParams& m);

// Same structure with every learnable tensor aliased (shared values,
// private gradients); lets worker threads run backward concurrently.
ModelParams alias_model(const ModelParams& m);

std::vector<Parameter> make_parameters(ModelParams& m);

struct ForwardResult {
  Tensor s0;
  SlotPass pass1;
  QuantizeResult quant;  // indices empty when quantization is off
  Tensor m_c, m_s;       // nullptr when the corresponding flag is off
  Tensor mod_map;
  SlotPass pass2;
  DecoderOutput dec;
  Tensor l_recon, l_vq, l_total;  // l_vq nullptr when use_vq is off
};

// Two-pass forward: bottom-up pass, bootstrap (quantized codes + attention
// rows), modulated pass, autoregressive reconstruction, both losses.
// noise_seed drives the shared slot initialization of the two passes.
ForwardResult forward_full(Graph& g, ModelParams& m, const Tensor& x,
                           const TrainConfig& cfg, std::uint64_t noise_seed);

struct BaselineResult {
  Tensor s0;
  SlotPass pass1;
  DecoderOutput dec;
  Tensor l_recon;
};

// Single-pass reference: bottom-up slot attention straight into the decoder.
// Used as the oracle the all-flags-off model must reproduce bit-exactly.
BaselineResult forward_baseline(Graph& g, ModelParams& m, const Tensor& x,
                                const TrainConfig& cfg,
                                std::uint64_t noise_seed);

// Analytic forward-cost model mirroring forward_full's op charges.
FlopCounter count_flops(const TrainConfig& cfg);

double pass2_overhead_fraction(const FlopCounter& c);

std::string stage_name(Stage s);

}  // namespace tdsa
