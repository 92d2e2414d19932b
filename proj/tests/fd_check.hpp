// Central finite-difference gradient checking shared by the unit tests and
// the acceptance suite.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tdsa/nn.hpp"
#include "tdsa/rng.hpp"
#include "tdsa/tensor.hpp"

namespace fd {

inline tdsa::Tensor randn(std::vector<long> shape, tdsa::Rng& rng,
                          bool requires_grad = true, double scale = 1.0,
                          double offset = 0.0) {
  tdsa::Tensor t = tdsa::make_tensor(std::move(shape), requires_grad);
  for (double& v : *t->val) v = offset + scale * rng.normal();
  return t;
}

struct FdCase {
  std::string name;
  std::function<tdsa::Tensor(tdsa::Graph&, std::vector<tdsa::Tensor>&)> forward;
  std::vector<tdsa::Tensor> inputs;
};

inline double forward_loss(const FdCase& c, std::vector<tdsa::Tensor>& inputs,
                           const tdsa::Tensor& target) {
  tdsa::Graph g(false);
  tdsa::Tensor out = c.forward(g, inputs);
  if (out->numel() == 1 && out->shape.empty()) return out->v()[0];
  tdsa::Graph g2(false);
  return g2.mse(out, target)->v()[0];
}

struct FdReport {
  long checked = 0;
  long failed = 0;
  double worst = 0;
  std::string worst_case;
};

// Runs analytic backward once, then probes input entries with central
// differences (eps = 1e-4) and requires relative error < 1e-3.
inline void check_case(FdCase c, tdsa::Rng& rng, FdReport& report,
                       long max_probes_per_input = 24) {
  tdsa::Graph g;
  tdsa::Tensor out = c.forward(g, c.inputs);
  tdsa::Tensor target, loss;
  if (out->numel() == 1 && out->shape.empty()) {
    loss = out;
    target = tdsa::make_tensor({}, false);
  } else {
    target = randn(out->shape, rng, false);
    loss = g.mse(out, target);
  }
  g.backward(loss);

  const double eps = 1e-4;
  for (tdsa::Tensor& in : c.inputs) {
    if (!in->requires_grad) continue;
    const long n = in->numel();
    for (long probe = 0; probe < std::min(n, max_probes_per_input); ++probe) {
      const long j = n <= max_probes_per_input ? probe : rng.uniform_int(0, n - 1);
      const double saved = in->v()[j];
      in->v()[j] = saved + eps;
      const double lp = forward_loss(c, c.inputs, target);
      in->v()[j] = saved - eps;
      const double lm = forward_loss(c, c.inputs, target);
      in->v()[j] = saved;
      const double numeric = (lp - lm) / (2 * eps);
      const double analytic = in->grad[j];
      const double denom =
          std::max({std::fabs(numeric), std::fabs(analytic), 1e-3});
      const double rel = std::fabs(analytic - numeric) / denom;
      report.checked += 1;
      if (rel >= 1e-3) report.failed += 1;
      if (rel > report.worst) {
        report.worst = rel;
        report.worst_case = c.name;
      }
    }
  }
}

inline std::vector<FdCase> all_primitive_cases(tdsa::Rng& rng) {
  using tdsa::Graph;
  using tdsa::GruWeights;
  using tdsa::Tensor;
  std::vector<FdCase> cases;
  auto add = [&](std::string name, std::vector<Tensor> inputs,
                 std::function<Tensor(Graph&, std::vector<Tensor>&)> fwd) {
    cases.push_back({std::move(name), std::move(fwd), std::move(inputs)});
  };

  add("matmul", {randn({4, 5}, rng), randn({5, 3}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.matmul(in[0], in[1]); });
  add("matmul_nt", {randn({4, 5}, rng), randn({3, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.matmul_nt(in[0], in[1]); });
  add("add", {randn({4, 5}, rng), randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.add(in[0], in[1]); });
  add("sub", {randn({4, 5}, rng), randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.sub(in[0], in[1]); });
  add("mul", {randn({4, 5}, rng), randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.mul(in[0], in[1]); });
  add("scale", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.scale(in[0], -1.7); });
  add("add_scalar", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.add_scalar(in[0], 0.3); });
  add("add_rowvec", {randn({4, 5}, rng), randn({5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.add_rowvec(in[0], in[1]); });
  add("mul_rowvec", {randn({4, 5}, rng), randn({5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.mul_rowvec(in[0], in[1]); });
  add("sub_colvec", {randn({4, 5}, rng), randn({4}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.sub_colvec(in[0], in[1]); });
  add("div_colvec", {randn({4, 5}, rng), randn({4}, rng, true, 0.2, 2.0)},
      [](Graph& g, std::vector<Tensor>& in) { return g.div_colvec(in[0], in[1]); });
  add("sum_axis0", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.sum_axis(in[0], 0); });
  add("sum_axis1", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.sum_axis(in[0], 1); });
  add("mean_axis0", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.mean_axis(in[0], 0); });
  add("mean_axis1", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.mean_axis(in[0], 1); });
  add("softmax_axis0", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.softmax(in[0], 0); });
  add("softmax_axis1", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.softmax(in[0], 1); });
  add("layer_norm",
      {randn({4, 5}, rng), randn({5}, rng, true, 0.3, 1.0), randn({5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) {
        return g.layer_norm(in[0], in[1], in[2]);
      });
  add("relu", {randn({4, 5}, rng, true, 1.0, 0.25)},
      [](Graph& g, std::vector<Tensor>& in) { return g.relu(in[0]); });
  add("gelu", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.gelu(in[0]); });
  add("exp", {randn({4, 5}, rng, true, 0.5)},
      [](Graph& g, std::vector<Tensor>& in) { return g.exp(in[0]); });
  add("transpose", {randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.transpose(in[0]); });
  add("outer_rows", {randn({3, 4}, rng), randn({3, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.outer_rows(in[0], in[1]); });
  add("modulated_sum",
      {randn({3, 4}, rng), randn({3, 4, 5}, rng), randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) {
        return g.modulated_sum(in[0], in[1], in[2]);
      });
  add("gather_rows", {randn({6, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) {
        return g.gather_rows(in[0], {4, 0, 4, 2});
      });
  add("slice_rows", {randn({6, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.slice_rows(in[0], 1, 4); });
  add("slice_cols", {randn({4, 6}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.slice_cols(in[0], 2, 5); });
  add("concat_rows", {randn({2, 5}, rng), randn({3, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.concat_rows(in[0], in[1]); });
  add("concat_cols", {randn({4, 2}, rng), randn({4, 3}, rng)},
      [](Graph& g, std::vector<Tensor>& in) {
        return g.concat_cols({in[0], in[1]});
      });
  add("linear", {randn({4, 5}, rng), randn({3, 5}, rng), randn({3}, rng)},
      [](Graph& g, std::vector<Tensor>& in) {
        return g.linear(in[0], in[1], in[2]);
      });
  add("mse", {randn({4, 5}, rng), randn({4, 5}, rng)},
      [](Graph& g, std::vector<Tensor>& in) { return g.mse(in[0], in[1]); });

  {
    tdsa::Rng wrng(rng.next_u64());
    GruWeights w = tdsa::init_gru(wrng, 4, 5);
    std::vector<Tensor> inputs = {randn({3, 4}, rng), randn({3, 5}, rng)};
    for (Tensor* t : {&w.wi_r, &w.wi_z, &w.wi_n, &w.wh_r, &w.wh_z, &w.wh_n,
                      &w.bi_r, &w.bi_z, &w.bi_n, &w.bh_r, &w.bh_z, &w.bh_n})
      inputs.push_back(*t);
    add("gru_cell", inputs, [](Graph& g, std::vector<Tensor>& in) {
      GruWeights w{in[2], in[3], in[4],  in[5],  in[6],  in[7],
                   in[8], in[9], in[10], in[11], in[12], in[13]};
      return g.gru_cell(in[0], in[1], w);
    });
  }
  return cases;
}

}  // namespace fd
