#include "tdsa/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace tdsa {

namespace {

Tensor xavier(Rng& rng, long out, long in) {
  Tensor t = make_tensor({out, in}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : *t->val) v = rng.uniform(-limit, limit);
  return t;
}

Tensor zero_vec(long n) { return make_tensor({n}, true); }

}  // namespace

LinearParams init_linear(Rng& rng, long in, long out) {
  return LinearParams{xavier(rng, out, in), zero_vec(out)};
}

MlpParams init_mlp(Rng& rng, long in, long hidden, long out) {
  return MlpParams{init_linear(rng, in, hidden), init_linear(rng, hidden, out)};
}

LayerNormParams init_layer_norm(long dim) {
  LayerNormParams p{make_tensor({dim}, true), make_tensor({dim}, true)};
  for (double& v : *p.gamma->val) v = 1.0;
  return p;
}

GruWeights init_gru(Rng& rng, long d_in, long d_hidden) {
  GruWeights w;
  w.wi_r = xavier(rng, d_hidden, d_in);
  w.wi_z = xavier(rng, d_hidden, d_in);
  w.wi_n = xavier(rng, d_hidden, d_in);
  w.wh_r = xavier(rng, d_hidden, d_hidden);
  w.wh_z = xavier(rng, d_hidden, d_hidden);
  w.wh_n = xavier(rng, d_hidden, d_hidden);
  w.bi_r = zero_vec(d_hidden);
  w.bi_z = zero_vec(d_hidden);
  w.bi_n = zero_vec(d_hidden);
  w.bh_r = zero_vec(d_hidden);
  w.bh_z = zero_vec(d_hidden);
  w.bh_n = zero_vec(d_hidden);
  return w;
}

Tensor mlp_forward(Graph& g, const MlpParams& p, const Tensor& x,
                   bool use_gelu) {
  Tensor h = g.linear(x, p.fc1.w, p.fc1.b);
  h = use_gelu ? g.gelu(h) : g.relu(h);
  return g.linear(h, p.fc2.w, p.fc2.b);
}

Parameter make_parameter(std::string name, Tensor t) {
  Parameter p;
  p.name = std::move(name);
  p.t = std::move(t);
  p.adam_m.assign(p.t->val->size(), 0.0);
  p.adam_v.assign(p.t->val->size(), 0.0);
  return p;
}

void adam_step(std::vector<Parameter>& params, double lr, double beta1,
               double beta2, double eps) {
  for (Parameter& p : params) {
    for (double g : p.t->grad)
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in parameter " +
                                 p.name);
    p.step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.step_count));
    double* v = p.t->v();
    for (std::size_t i = 0; i < p.t->grad.size(); ++i) {
      const double g = p.t->grad[i];
      p.adam_m[i] = beta1 * p.adam_m[i] + (1.0 - beta1) * g;
      p.adam_v[i] = beta2 * p.adam_v[i] + (1.0 - beta2) * g * g;
      const double mhat = p.adam_m[i] / bc1;
      const double vhat = p.adam_v[i] / bc2;
      v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    zero_grad(p.t);
  }
}

double clip_grad_norm(std::vector<Parameter>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter& p : params)
    for (double g : p.t->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter& p : params)
      for (double& g : p.t->grad) g *= s;
  }
  return norm;
}

}  // namespace tdsa
