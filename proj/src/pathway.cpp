#include "tdsa/pathway.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdsa {

CodebookParams init_codebook(Rng& rng, long e, long d) {
  if (e < 2) throw std::invalid_argument("init_codebook: need at least 2 codes");
  CodebookParams cb;
  cb.codes = make_tensor({e, d}, true);
  for (double& x : *cb.codes->val) x = rng.normal();
  cb.usage.assign(e, 0);
  return cb;
}

QuantizeResult quantize(Graph& g, const Tensor& slots,
                        const CodebookParams& cb) {
  if (!cb.codes || cb.codes->shape[0] == 0)
    throw std::invalid_argument("quantize: empty codebook");
  const long k_slots = slots->shape[0], d = slots->shape[1];
  const long e = cb.codes->shape[0];
  if (cb.codes->shape[1] != d)
    throw std::invalid_argument("quantize: dim mismatch slots " +
                                shape_str(slots->shape) + " vs codebook " +
                                shape_str(cb.codes->shape));
  QuantizeResult r;
  r.indices.resize(k_slots);
  for (long k = 0; k < k_slots; ++k) {
    const double* s = slots->v() + k * d;
    double best = std::numeric_limits<double>::infinity();
    long best_e = 0;
    for (long c = 0; c < e; ++c) {
      const double* row = cb.codes->v() + c * d;
      double dist = 0;
      for (long j = 0; j < d; ++j) {
        const double diff = s[j] - row[j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_e = c;
      }
    }
    r.indices[k] = best_e;
  }
  g.add_flops(2.0 * static_cast<double>(k_slots) * e * d);
  r.ste_codes = g.ste_select(slots, cb.codes, r.indices);
  r.vq_codes = g.gather_rows(cb.codes, r.indices);
  return r;
}

void record_usage(CodebookParams& cb, const std::vector<long>& indices) {
  for (long i : indices) cb.usage[i] += 1;
}

void reset_usage(CodebookParams& cb) { cb.usage.assign(cb.usage.size(), 0); }

double perplexity(const std::vector<long>& counts) {
  long total = 0;
  for (long c : counts) total += c;
  if (total <= 0)
    throw std::invalid_argument("perplexity: usage counts are all zero");
  double h = 0;
  for (long c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return std::exp(h);
}

Tensor channel_modulation(Graph& g, const MlpParams& mlp, const Tensor& codes) {
  return mlp_forward(g, mlp, codes);
}

Tensor spatial_modulation(Graph& g, const Tensor& attn, bool shift) {
  if (!shift) return attn;
  Tensor mean = g.mean_axis(attn, 1);
  return g.add_scalar(g.sub_colvec(attn, mean), 1.0);
}

Tensor build_modulation_map(Graph& g, const Tensor& m_s, const Tensor& m_c) {
  return g.outer_rows(m_s, m_c);
}

std::vector<double> nearest_other_code_dist(const CodebookParams& cb) {
  const long e = cb.codes->shape[0], d = cb.codes->shape[1];
  std::vector<double> out(e, 0.0);
  for (long a = 0; a < e; ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (long b = 0; b < e; ++b) {
      if (a == b) continue;
      double dist = 0;
      for (long j = 0; j < d; ++j) {
        const double diff = cb.codes->v()[a * d + j] - cb.codes->v()[b * d + j];
        dist += diff * diff;
      }
      best = std::min(best, dist);
    }
    out[a] = best;
  }
  return out;
}

}  // namespace tdsa
