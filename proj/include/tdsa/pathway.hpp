#pragma once

#include <vector>

#include "tdsa/nn.hpp"
#include "tdsa/rng.hpp"
#include "tdsa/tensor.hpp"

namespace tdsa {

struct CodebookParams {
  Tensor codes;              // E x d, learnable
  std::vector<long> usage;   // per logging window, diagnostics only
};

CodebookParams init_codebook(Rng& rng, long e, long d);

struct QuantizeResult {
  std::vector<long> indices;  // nearest code per slot, ties -> lowest index
  Tensor ste_codes;  // code values; gradient passes through to the slots
  Tensor vq_codes;   // code values; gradient flows into the codebook rows
};

QuantizeResult quantize(Graph& g, const Tensor& slots,
                        const CodebookParams& cb);

void record_usage(CodebookParams& cb, const std::vector<long>& indices);
void reset_usage(CodebookParams& cb);

// exp(entropy) of the empirical code-usage distribution; in [1, E].
double perplexity(const std::vector<long>& counts);

// m_c[k] = MLP(c*_k)
Tensor channel_modulation(Graph& g, const MlpParams& mlp, const Tensor& codes);

// shift: m_s[k] = 1 + (a_k - mean(a_k)); otherwise the rows are used as-is.
Tensor spatial_modulation(Graph& g, const Tensor& attn, bool shift);

// M[k] = outer(m_s[k], m_c[k])
Tensor build_modulation_map(Graph& g, const Tensor& m_s, const Tensor& m_c);

// squared distance from each code to its nearest other code, for diagnostics.
std::vector<double> nearest_other_code_dist(const CodebookParams& cb);

}  // namespace tdsa
