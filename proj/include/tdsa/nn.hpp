#pragma once

#include <string>
#include <vector>

#include "tdsa/rng.hpp"
#include "tdsa/tensor.hpp"

namespace tdsa {

struct LinearParams {
  Tensor w;  // out x in
  Tensor b;  // out
};

struct MlpParams {
  LinearParams fc1, fc2;
};

struct LayerNormParams {
  Tensor gamma, beta;
};

LinearParams init_linear(Rng& rng, long in, long out);
MlpParams init_mlp(Rng& rng, long in, long hidden, long out);
LayerNormParams init_layer_norm(long dim);
GruWeights init_gru(Rng& rng, long d_in, long d_hidden);

Tensor mlp_forward(Graph& g, const MlpParams& p, const Tensor& x,
                   bool use_gelu = false);

// Named handle plus Adam state for one learnable tensor.
struct Parameter {
  std::string name;
  Tensor t;
  std::vector<double> adam_m, adam_v;
  long step_count = 0;
};

Parameter make_parameter(std::string name, Tensor t);

// In-place Adam update with bias correction; zeroes gradients afterwards.
// Throws if any gradient is non-finite, naming the parameter.
void adam_step(std::vector<Parameter>& params, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Global-norm gradient clipping over the whole parameter list.
double clip_grad_norm(std::vector<Parameter>& params, double max_norm);

}  // namespace tdsa
