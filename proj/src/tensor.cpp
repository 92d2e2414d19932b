#include "tdsa/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "tdsa/kernels.hpp"

namespace tdsa {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void require_2d(const Tensor& t, const char* op) {
  if (t->shape.size() != 2)
    fail(std::string(op) + ": expected 2-d tensor, got " +
         shape_str(t->shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a->shape != b->shape)
    fail(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
         " vs " + shape_str(b->shape));
}

void require_vec_len(const Tensor& v, long n, const char* op) {
  if (v->shape.size() != 1 || v->shape[0] != n)
    fail(std::string(op) + ": expected vector of length " +
         std::to_string(n) + ", got " + shape_str(v->shape));
}

}  // namespace

long shape_numel(const std::vector<long>& shape) {
  long n = 1;
  for (long d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<long>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor make_tensor(std::vector<long> shape, bool requires_grad) {
  for (long d : shape)
    if (d < 0) fail("make_tensor: negative dimension in " + shape_str(shape));
  auto t = std::make_shared<TensorData>();
  long n = shape_numel(shape);
  t->shape = std::move(shape);
  t->val = std::make_shared<std::vector<double>>(n, 0.0);
  t->grad.assign(n, 0.0);
  t->requires_grad = requires_grad;
  return t;
}

Tensor make_tensor(std::vector<long> shape, std::vector<double> values,
                   bool requires_grad) {
  if (shape_numel(shape) != static_cast<long>(values.size()))
    fail("make_tensor: " + std::to_string(values.size()) +
         " values do not fill shape " + shape_str(shape));
  auto t = make_tensor(std::move(shape), requires_grad);
  *t->val = std::move(values);
  return t;
}

Tensor full_like_shape(std::vector<long> shape, double value) {
  auto t = make_tensor(std::move(shape), false);
  for (double& x : *t->val) x = value;
  return t;
}

Tensor alias_tensor(const Tensor& t) {
  auto a = std::make_shared<TensorData>();
  a->shape = t->shape;
  a->val = t->val;
  a->grad.assign(t->val->size(), 0.0);
  a->requires_grad = t->requires_grad;
  return a;
}

void zero_grad(const Tensor& t) { t->grad.assign(t->grad.size(), 0.0); }

Tensor Graph::result(std::vector<long> shape, bool requires_grad) {
  return make_tensor(std::move(shape), requires_grad);
}

void Graph::push(Tensor out, std::function<void()> back) {
  if (record_ && out->requires_grad)
    nodes_.push_back(Node{std::move(out), std::move(back)});
}

void Graph::backward(const Tensor& loss) {
  if (loss->numel() != 1)
    fail("backward: loss must be scalar, got " + shape_str(loss->shape));
  if (nodes_.empty()) fail("backward: empty tape");
  for (auto& n : nodes_) zero_grad(n.out);
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
}

// ---------------------------------------------------------------------------
// matmul family. Cost: m*k*n multiply-adds.

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a->shape[1] != b->shape[0])
    fail("matmul: shape mismatch " + shape_str(a->shape) + " vs " +
         shape_str(b->shape));
  const long m = a->shape[0], k = a->shape[1], n = b->shape[1];
  Tensor out = result({m, n}, a->requires_grad || b->requires_grad);
  kernels::matmul(a->v(), b->v(), out->v(), m, k, n, false);
  count(static_cast<double>(m) * k * n);
  push(out, [a, b, out, m, k, n] {
    if (a->requires_grad)
      kernels::matmul_nt(out->grad.data(), b->v(), a->grad.data(), m, n, k,
                         true);
    if (b->requires_grad)
      kernels::matmul_tn(a->v(), out->grad.data(), b->grad.data(), m, k, n,
                         true);
  });
  return out;
}

Tensor Graph::matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  if (a->shape[1] != b->shape[1])
    fail("matmul_nt: shape mismatch " + shape_str(a->shape) + " vs " +
         shape_str(b->shape));
  const long m = a->shape[0], k = a->shape[1], n = b->shape[0];
  Tensor out = result({m, n}, a->requires_grad || b->requires_grad);
  kernels::matmul_nt(a->v(), b->v(), out->v(), m, k, n, false);
  count(static_cast<double>(m) * k * n);
  push(out, [a, b, out, m, k, n] {
    if (a->requires_grad)
      kernels::matmul(out->grad.data(), b->v(), a->grad.data(), m, n, k, true);
    if (b->requires_grad)
      kernels::matmul_tn(out->grad.data(), a->v(), b->grad.data(), m, n, k,
                         true);
  });
  return out;
}

// ---------------------------------------------------------------------------
// elementwise. Cost: numel per op (2x for exp/mse, 6x for gelu).

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = result(a->shape, a->requires_grad || b->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) out->v()[i] = a->v()[i] + b->v()[i];
  count(static_cast<double>(n));
  push(out, [a, b, out, n] {
    if (a->requires_grad)
      for (long i = 0; i < n; ++i) a->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (long i = 0; i < n; ++i) b->grad[i] += out->grad[i];
  });
  return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = result(a->shape, a->requires_grad || b->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) out->v()[i] = a->v()[i] - b->v()[i];
  count(static_cast<double>(n));
  push(out, [a, b, out, n] {
    if (a->requires_grad)
      for (long i = 0; i < n; ++i) a->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (long i = 0; i < n; ++i) b->grad[i] -= out->grad[i];
  });
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = result(a->shape, a->requires_grad || b->requires_grad);
  const long n = out->numel();
  kernels::hadamard(a->v(), b->v(), out->v(), n);
  count(static_cast<double>(n));
  push(out, [a, b, out, n] {
    if (a->requires_grad)
      for (long i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->v()[i];
    if (b->requires_grad)
      for (long i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->v()[i];
  });
  return out;
}

Tensor Graph::scale(const Tensor& a, double c) {
  Tensor out = result(a->shape, a->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) out->v()[i] = a->v()[i] * c;
  count(static_cast<double>(n));
  push(out, [a, out, c, n] {
    for (long i = 0; i < n; ++i) a->grad[i] += out->grad[i] * c;
  });
  return out;
}

Tensor Graph::add_scalar(const Tensor& a, double c) {
  Tensor out = result(a->shape, a->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) out->v()[i] = a->v()[i] + c;
  count(static_cast<double>(n));
  push(out, [a, out, n] {
    for (long i = 0; i < n; ++i) a->grad[i] += out->grad[i];
  });
  return out;
}

Tensor Graph::add_rowvec(const Tensor& a, const Tensor& v) {
  require_2d(a, "add_rowvec");
  require_vec_len(v, a->shape[1], "add_rowvec");
  Tensor out = result(a->shape, a->requires_grad || v->requires_grad);
  const long r = a->shape[0], c = a->shape[1];
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      out->v()[i * c + j] = a->v()[i * c + j] + v->v()[j];
  count(static_cast<double>(r) * c);
  push(out, [a, v, out, r, c] {
    if (a->requires_grad)
      for (long i = 0; i < r * c; ++i) a->grad[i] += out->grad[i];
    if (v->requires_grad)
      for (long j = 0; j < c; ++j)
        for (long i = 0; i < r; ++i) v->grad[j] += out->grad[i * c + j];
  });
  return out;
}

Tensor Graph::mul_rowvec(const Tensor& a, const Tensor& v) {
  require_2d(a, "mul_rowvec");
  require_vec_len(v, a->shape[1], "mul_rowvec");
  Tensor out = result(a->shape, a->requires_grad || v->requires_grad);
  const long r = a->shape[0], c = a->shape[1];
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      out->v()[i * c + j] = a->v()[i * c + j] * v->v()[j];
  count(static_cast<double>(r) * c);
  push(out, [a, v, out, r, c] {
    if (a->requires_grad)
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j)
          a->grad[i * c + j] += out->grad[i * c + j] * v->v()[j];
    if (v->requires_grad)
      for (long j = 0; j < c; ++j)
        for (long i = 0; i < r; ++i)
          v->grad[j] += out->grad[i * c + j] * a->v()[i * c + j];
  });
  return out;
}

Tensor Graph::sub_colvec(const Tensor& a, const Tensor& v) {
  require_2d(a, "sub_colvec");
  require_vec_len(v, a->shape[0], "sub_colvec");
  Tensor out = result(a->shape, a->requires_grad || v->requires_grad);
  const long r = a->shape[0], c = a->shape[1];
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      out->v()[i * c + j] = a->v()[i * c + j] - v->v()[i];
  count(static_cast<double>(r) * c);
  push(out, [a, v, out, r, c] {
    if (a->requires_grad)
      for (long i = 0; i < r * c; ++i) a->grad[i] += out->grad[i];
    if (v->requires_grad)
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) v->grad[i] -= out->grad[i * c + j];
  });
  return out;
}

Tensor Graph::div_colvec(const Tensor& a, const Tensor& v) {
  require_2d(a, "div_colvec");
  require_vec_len(v, a->shape[0], "div_colvec");
  Tensor out = result(a->shape, a->requires_grad || v->requires_grad);
  const long r = a->shape[0], c = a->shape[1];
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      out->v()[i * c + j] = a->v()[i * c + j] / v->v()[i];
  count(static_cast<double>(r) * c);
  push(out, [a, v, out, r, c] {
    for (long i = 0; i < r; ++i) {
      const double inv = 1.0 / v->v()[i];
      double acc = 0.0;
      for (long j = 0; j < c; ++j) {
        const double g = out->grad[i * c + j];
        if (a->requires_grad) a->grad[i * c + j] += g * inv;
        acc += g * out->v()[i * c + j];
      }
      if (v->requires_grad) v->grad[i] -= acc * inv;
    }
  });
  return out;
}

Tensor Graph::sum_axis(const Tensor& a, int axis) {
  require_2d(a, "sum_axis");
  if (axis != 0 && axis != 1) fail("sum_axis: axis must be 0 or 1");
  const long r = a->shape[0], c = a->shape[1];
  const long len = axis == 0 ? c : r;
  Tensor out = result({len}, a->requires_grad);
  if (axis == 1) {
    for (long i = 0; i < r; ++i) {
      double s = 0;
      for (long j = 0; j < c; ++j) s += a->v()[i * c + j];
      out->v()[i] = s;
    }
  } else {
    for (long j = 0; j < c; ++j) {
      double s = 0;
      for (long i = 0; i < r; ++i) s += a->v()[i * c + j];
      out->v()[j] = s;
    }
  }
  count(static_cast<double>(r) * c);
  push(out, [a, out, r, c, axis] {
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j)
        a->grad[i * c + j] += out->grad[axis == 1 ? i : j];
  });
  return out;
}

Tensor Graph::mean_axis(const Tensor& a, int axis) {
  require_2d(a, "mean_axis");
  if (axis != 0 && axis != 1) fail("mean_axis: axis must be 0 or 1");
  const long r = a->shape[0], c = a->shape[1];
  const long denom = axis == 0 ? r : c;
  if (denom == 0) fail("mean_axis: empty axis");
  Tensor out = sum_axis(a, axis);
  return scale(out, 1.0 / static_cast<double>(denom));
}

// ---------------------------------------------------------------------------
// softmax over one axis of a 2-d tensor. Cost: 4 per element.

Tensor Graph::softmax(const Tensor& a, int axis) {
  require_2d(a, "softmax");
  if (axis != 0 && axis != 1) fail("softmax: axis must be 0 or 1");
  const long r = a->shape[0], c = a->shape[1];
  if (r == 0 || c == 0)
    fail("softmax: empty axis in shape " + shape_str(a->shape));
  Tensor out = result(a->shape, a->requires_grad);
  const long slices = axis == 1 ? r : c;
  const long len = axis == 1 ? c : r;
  const long sstride = axis == 1 ? c : 1;
  const long estride = axis == 1 ? 1 : c;
  for (long s = 0; s < slices; ++s) {
    const double* x = a->v() + s * sstride;
    double* y = out->v() + s * sstride;
    double mx = x[0];
    for (long e = 1; e < len; ++e) mx = std::max(mx, x[e * estride]);
    double sum = 0;
    for (long e = 0; e < len; ++e) {
      const double v = std::exp(x[e * estride] - mx);
      y[e * estride] = v;
      sum += v;
    }
    const double inv = 1.0 / sum;
    for (long e = 0; e < len; ++e) y[e * estride] *= inv;
  }
  count(4.0 * static_cast<double>(r) * c);
  push(out, [a, out, slices, len, sstride, estride] {
    for (long s = 0; s < slices; ++s) {
      const double* y = out->v() + s * sstride;
      const double* g = out->grad.data() + s * sstride;
      double* gx = a->grad.data() + s * sstride;
      double dotgy = 0;
      for (long e = 0; e < len; ++e) dotgy += g[e * estride] * y[e * estride];
      for (long e = 0; e < len; ++e)
        gx[e * estride] += y[e * estride] * (g[e * estride] - dotgy);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// layer norm over the last axis, learnable affine. Cost: 8 per element.

Tensor Graph::layer_norm(const Tensor& a, const Tensor& gamma,
                         const Tensor& beta, double eps) {
  require_2d(a, "layer_norm");
  require_vec_len(gamma, a->shape[1], "layer_norm");
  require_vec_len(beta, a->shape[1], "layer_norm");
  const long r = a->shape[0], c = a->shape[1];
  Tensor out = result(a->shape, a->requires_grad || gamma->requires_grad ||
                                    beta->requires_grad);
  auto xhat = std::make_shared<std::vector<double>>(r * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (long i = 0; i < r; ++i) {
    const double* x = a->v() + i * c;
    double mean = 0;
    for (long j = 0; j < c; ++j) mean += x[j];
    mean /= static_cast<double>(c);
    double var = 0;
    for (long j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (long j = 0; j < c; ++j) {
      const double xh = (x[j] - mean) * is;
      (*xhat)[i * c + j] = xh;
      out->v()[i * c + j] = gamma->v()[j] * xh + beta->v()[j];
    }
  }
  count(8.0 * static_cast<double>(r) * c);
  push(out, [a, gamma, beta, out, xhat, inv_std, r, c] {
    std::vector<double> gxh(c);
    for (long i = 0; i < r; ++i) {
      const double* g = out->grad.data() + i * c;
      const double* xh = xhat->data() + i * c;
      double m1 = 0, m2 = 0;
      for (long j = 0; j < c; ++j) {
        gxh[j] = g[j] * gamma->v()[j];
        m1 += gxh[j];
        m2 += gxh[j] * xh[j];
      }
      m1 /= static_cast<double>(c);
      m2 /= static_cast<double>(c);
      if (a->requires_grad) {
        const double is = (*inv_std)[i];
        for (long j = 0; j < c; ++j)
          a->grad[i * c + j] += is * (gxh[j] - m1 - xh[j] * m2);
      }
      if (gamma->requires_grad)
        for (long j = 0; j < c; ++j) gamma->grad[j] += g[j] * xh[j];
      if (beta->requires_grad)
        for (long j = 0; j < c; ++j) beta->grad[j] += g[j];
    }
  });
  return out;
}

Tensor Graph::relu(const Tensor& a) {
  Tensor out = result(a->shape, a->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) out->v()[i] = a->v()[i] > 0 ? a->v()[i] : 0.0;
  count(static_cast<double>(n));
  push(out, [a, out, n] {
    for (long i = 0; i < n; ++i)
      if (a->v()[i] > 0) a->grad[i] += out->grad[i];
  });
  return out;
}

Tensor Graph::gelu(const Tensor& a) {
  Tensor out = result(a->shape, a->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) {
    const double x = a->v()[i];
    out->v()[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  count(6.0 * static_cast<double>(n));
  push(out, [a, out, n] {
    for (long i = 0; i < n; ++i) {
      const double x = a->v()[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      a->grad[i] += out->grad[i] * (cdf + x * pdf);
    }
  });
  return out;
}

Tensor Graph::exp(const Tensor& a) {
  Tensor out = result(a->shape, a->requires_grad);
  const long n = out->numel();
  for (long i = 0; i < n; ++i) out->v()[i] = std::exp(a->v()[i]);
  count(2.0 * static_cast<double>(n));
  push(out, [a, out, n] {
    for (long i = 0; i < n; ++i) a->grad[i] += out->grad[i] * out->v()[i];
  });
  return out;
}

Tensor Graph::transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const long r = a->shape[0], c = a->shape[1];
  Tensor out = result({c, r}, a->requires_grad);
  kernels::transpose(a->v(), out->v(), r, c);
  push(out, [a, out, r, c] {
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) a->grad[i * c + j] += out->grad[j * r + i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// modulation map primitives.

Tensor Graph::outer_rows(const Tensor& ms, const Tensor& mc) {
  require_2d(ms, "outer_rows");
  require_2d(mc, "outer_rows");
  if (ms->shape[0] != mc->shape[0])
    fail("outer_rows: slot count mismatch " + shape_str(ms->shape) + " vs " +
         shape_str(mc->shape));
  const long K = ms->shape[0], N = ms->shape[1], D = mc->shape[1];
  Tensor out = result({K, N, D}, ms->requires_grad || mc->requires_grad);
  for (long k = 0; k < K; ++k)
    for (long n = 0; n < N; ++n) {
      const double s = ms->v()[k * N + n];
      double* o = out->v() + (k * N + n) * D;
      const double* c = mc->v() + k * D;
      for (long d = 0; d < D; ++d) o[d] = s * c[d];
    }
  count(static_cast<double>(K) * N * D);
  push(out, [ms, mc, out, K, N, D] {
    for (long k = 0; k < K; ++k)
      for (long n = 0; n < N; ++n) {
        const double* g = out->grad.data() + (k * N + n) * D;
        if (ms->requires_grad)
          ms->grad[k * N + n] += kernels::dot(g, mc->v() + k * D, D);
        if (mc->requires_grad) {
          const double s = ms->v()[k * N + n];
          for (long d = 0; d < D; ++d) mc->grad[k * D + d] += s * g[d];
        }
      }
  });
  return out;
}

Tensor Graph::modulated_sum(const Tensor& at, const Tensor& m,
                            const Tensor& v) {
  require_2d(at, "modulated_sum");
  require_2d(v, "modulated_sum");
  if (m->shape.size() != 3) fail("modulated_sum: modulation map must be 3-d");
  const long K = at->shape[0], N = at->shape[1], D = v->shape[1];
  if (m->shape[0] != K || m->shape[1] != N || m->shape[2] != D ||
      v->shape[0] != N)
    fail("modulated_sum: shape mismatch attn " + shape_str(at->shape) +
         ", map " + shape_str(m->shape) + ", values " + shape_str(v->shape));
  Tensor out =
      result({K, D}, at->requires_grad || m->requires_grad || v->requires_grad);
  // W_k = M_k (.) V is materialized so the weighted sum goes through the
  // same dot kernel as the plain matmul update; with an all-ones map the two
  // are bit-identical.
  auto w = std::make_shared<std::vector<double>>(K * N * D);
  std::vector<double> wt(D * N);
  for (long k = 0; k < K; ++k) {
    double* wk = w->data() + k * N * D;
    kernels::hadamard(m->v() + k * N * D, v->v(), wk, N * D);
    kernels::transpose(wk, wt.data(), N, D);
    for (long d = 0; d < D; ++d)
      out->v()[k * D + d] = kernels::dot(at->v() + k * N, wt.data() + d * N, N);
  }
  count(2.0 * static_cast<double>(K) * N * D);
  push(out, [at, m, v, out, w, K, N, D] {
    for (long k = 0; k < K; ++k) {
      const double* g = out->grad.data() + k * D;
      const double* wk = w->data() + k * N * D;
      if (at->requires_grad)
        for (long n = 0; n < N; ++n)
          at->grad[k * N + n] += kernels::dot(g, wk + n * D, D);
      if (m->requires_grad)
        for (long n = 0; n < N; ++n) {
          const double s = at->v()[k * N + n];
          for (long d = 0; d < D; ++d)
            m->grad[(k * N + n) * D + d] += s * v->v()[n * D + d] * g[d];
        }
    }
    if (v->requires_grad) {
      std::vector<double> att(N * K);
      kernels::transpose(at->v(), att.data(), K, N);
      std::vector<double> tv(K);
      for (long n = 0; n < N; ++n)
        for (long d = 0; d < D; ++d) {
          for (long k = 0; k < K; ++k)
            tv[k] = m->v()[(k * N + n) * D + d] * out->grad[k * D + d];
          v->grad[n * D + d] += kernels::dot(att.data() + n * K, tv.data(), K);
        }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// row selection / assembly.

Tensor Graph::gather_rows(const Tensor& table, const std::vector<long>& idx) {
  require_2d(table, "gather_rows");
  const long E = table->shape[0], D = table->shape[1];
  const long K = static_cast<long>(idx.size());
  for (long i : idx)
    if (i < 0 || i >= E)
      fail("gather_rows: index " + std::to_string(i) + " out of range [0, " +
           std::to_string(E) + ")");
  Tensor out = result({K, D}, table->requires_grad);
  for (long k = 0; k < K; ++k)
    for (long d = 0; d < D; ++d) out->v()[k * D + d] = table->v()[idx[k] * D + d];
  push(out, [table, out, idx, K, D] {
    for (long k = 0; k < K; ++k)
      for (long d = 0; d < D; ++d)
        table->grad[idx[k] * D + d] += out->grad[k * D + d];
  });
  return out;
}

Tensor Graph::ste_select(const Tensor& src, const Tensor& table,
                         const std::vector<long>& idx) {
  require_2d(src, "ste_select");
  require_2d(table, "ste_select");
  if (static_cast<long>(idx.size()) != src->shape[0] ||
      src->shape[1] != table->shape[1])
    fail("ste_select: shape mismatch src " + shape_str(src->shape) +
         " vs table " + shape_str(table->shape));
  const long K = src->shape[0], D = src->shape[1];
  Tensor out = result({K, D}, src->requires_grad);
  for (long k = 0; k < K; ++k)
    for (long d = 0; d < D; ++d) out->v()[k * D + d] = table->v()[idx[k] * D + d];
  push(out, [src, out, K, D] {
    for (long i = 0; i < K * D; ++i) src->grad[i] += out->grad[i];
  });
  return out;
}

Tensor Graph::slice_rows(const Tensor& a, long r0, long r1) {
  require_2d(a, "slice_rows");
  if (r0 < 0 || r1 > a->shape[0] || r0 > r1)
    fail("slice_rows: bad range [" + std::to_string(r0) + ", " +
         std::to_string(r1) + ") for " + shape_str(a->shape));
  const long c = a->shape[1];
  Tensor out = result({r1 - r0, c}, a->requires_grad);
  for (long i = 0; i < (r1 - r0) * c; ++i) out->v()[i] = a->v()[r0 * c + i];
  push(out, [a, out, r0, r1, c] {
    for (long i = 0; i < (r1 - r0) * c; ++i) a->grad[r0 * c + i] += out->grad[i];
  });
  return out;
}

Tensor Graph::slice_cols(const Tensor& a, long c0, long c1) {
  require_2d(a, "slice_cols");
  if (c0 < 0 || c1 > a->shape[1] || c0 > c1)
    fail("slice_cols: bad range [" + std::to_string(c0) + ", " +
         std::to_string(c1) + ") for " + shape_str(a->shape));
  const long r = a->shape[0], c = a->shape[1], w = c1 - c0;
  Tensor out = result({r, w}, a->requires_grad);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < w; ++j) out->v()[i * w + j] = a->v()[i * c + c0 + j];
  push(out, [a, out, r, c, c0, w] {
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < w; ++j)
        a->grad[i * c + c0 + j] += out->grad[i * w + j];
  });
  return out;
}

Tensor Graph::concat_rows(const Tensor& a, const Tensor& b) {
  require_2d(a, "concat_rows");
  require_2d(b, "concat_rows");
  if (a->shape[1] != b->shape[1])
    fail("concat_rows: column mismatch " + shape_str(a->shape) + " vs " +
         shape_str(b->shape));
  const long ra = a->shape[0], rb = b->shape[0], c = a->shape[1];
  Tensor out = result({ra + rb, c}, a->requires_grad || b->requires_grad);
  for (long i = 0; i < ra * c; ++i) out->v()[i] = a->v()[i];
  for (long i = 0; i < rb * c; ++i) out->v()[ra * c + i] = b->v()[i];
  push(out, [a, b, out, ra, rb, c] {
    if (a->requires_grad)
      for (long i = 0; i < ra * c; ++i) a->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (long i = 0; i < rb * c; ++i) b->grad[i] += out->grad[ra * c + i];
  });
  return out;
}

Tensor Graph::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_cols: no inputs");
  const long r = parts[0]->shape[0];
  long total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p->shape[0] != r) fail("concat_cols: row mismatch");
    total += p->shape[1];
    rg = rg || p->requires_grad;
  }
  Tensor out = result({r, total}, rg);
  long off = 0;
  for (const auto& p : parts) {
    const long c = p->shape[1];
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j)
        out->v()[i * total + off + j] = p->v()[i * c + j];
    off += c;
  }
  push(out, [parts, out, r, total] {
    long off2 = 0;
    for (const auto& p : parts) {
      const long c = p->shape[1];
      if (p->requires_grad)
        for (long i = 0; i < r; ++i)
          for (long j = 0; j < c; ++j)
            p->grad[i * c + j] += out->grad[i * total + off2 + j];
      off2 += c;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// fused GRU cell, standard update/reset/candidate gates.
// Cost: rows * (3*din*D + 3*D*D) matmul madds + 12 per output element.

Tensor Graph::gru_cell(const Tensor& u, const Tensor& h, const GruWeights& w) {
  require_2d(u, "gru_cell");
  require_2d(h, "gru_cell");
  const long K = u->shape[0], din = u->shape[1], D = h->shape[1];
  if (h->shape[0] != K)
    fail("gru_cell: row mismatch " + shape_str(u->shape) + " vs " +
         shape_str(h->shape));
  if (w.wi_r->shape != std::vector<long>{D, din} ||
      w.wh_r->shape != std::vector<long>{D, D})
    fail("gru_cell: weight shape mismatch wi " + shape_str(w.wi_r->shape) +
         ", wh " + shape_str(w.wh_r->shape) + " for input " +
         shape_str(u->shape) + ", hidden " + shape_str(h->shape));
  bool rg = u->requires_grad || h->requires_grad;
  for (const Tensor& t : {w.wi_r, w.wi_z, w.wi_n, w.wh_r, w.wh_z, w.wh_n,
                          w.bi_r, w.bi_z, w.bi_n, w.bh_r, w.bh_z, w.bh_n})
    rg = rg || t->requires_grad;
  Tensor out = result({K, D}, rg);

  auto buf = std::make_shared<std::vector<double>>(4 * K * D);
  double* r = buf->data();
  double* z = buf->data() + K * D;
  double* nn = buf->data() + 2 * K * D;
  double* q = buf->data() + 3 * K * D;

  std::vector<double> pr(K * D), pz(K * D), pn(K * D);
  kernels::matmul_nt(u->v(), w.wi_r->v(), pr.data(), K, din, D, false);
  kernels::matmul_nt(h->v(), w.wh_r->v(), r, K, D, D, false);
  kernels::matmul_nt(u->v(), w.wi_z->v(), pz.data(), K, din, D, false);
  kernels::matmul_nt(h->v(), w.wh_z->v(), z, K, D, D, false);
  kernels::matmul_nt(u->v(), w.wi_n->v(), pn.data(), K, din, D, false);
  kernels::matmul_nt(h->v(), w.wh_n->v(), q, K, D, D, false);
  for (long k = 0; k < K; ++k)
    for (long d = 0; d < D; ++d) {
      const long i = k * D + d;
      q[i] += w.bh_n->v()[d];
      const double ar = pr[i] + w.bi_r->v()[d] + r[i] + w.bh_r->v()[d];
      const double az = pz[i] + w.bi_z->v()[d] + z[i] + w.bh_z->v()[d];
      r[i] = 1.0 / (1.0 + std::exp(-ar));
      z[i] = 1.0 / (1.0 + std::exp(-az));
      const double an = pn[i] + w.bi_n->v()[d] + r[i] * q[i];
      nn[i] = std::tanh(an);
      out->v()[i] = (1.0 - z[i]) * nn[i] + z[i] * h->v()[i];
    }
  count(static_cast<double>(K) * (3.0 * din * D + 3.0 * D * D) +
        12.0 * static_cast<double>(K) * D);

  GruWeights wc = w;
  push(out, [u, h, wc, out, buf, K, din, D] {
    const double* r = buf->data();
    const double* z = buf->data() + K * D;
    const double* nn = buf->data() + 2 * K * D;
    const double* q = buf->data() + 3 * K * D;
    std::vector<double> gpr(K * D), gpz(K * D), gpn(K * D), gq(K * D);
    for (long i = 0; i < K * D; ++i) {
      const double g = out->grad[i];
      const double gz = g * (h->v()[i] - nn[i]);
      const double gn = g * (1.0 - z[i]);
      gpn[i] = gn * (1.0 - nn[i] * nn[i]);
      gq[i] = gpn[i] * r[i];
      const double gr = gpn[i] * q[i];
      gpr[i] = gr * r[i] * (1.0 - r[i]);
      gpz[i] = gz * z[i] * (1.0 - z[i]);
    }
    if (u->requires_grad) {
      kernels::matmul(gpr.data(), wc.wi_r->v(), u->grad.data(), K, D, din, true);
      kernels::matmul(gpz.data(), wc.wi_z->v(), u->grad.data(), K, D, din, true);
      kernels::matmul(gpn.data(), wc.wi_n->v(), u->grad.data(), K, D, din, true);
    }
    if (h->requires_grad) {
      kernels::matmul(gpr.data(), wc.wh_r->v(), h->grad.data(), K, D, D, true);
      kernels::matmul(gpz.data(), wc.wh_z->v(), h->grad.data(), K, D, D, true);
      kernels::matmul(gq.data(), wc.wh_n->v(), h->grad.data(), K, D, D, true);
      for (long i = 0; i < K * D; ++i) h->grad[i] += out->grad[i] * z[i];
    }
    if (wc.wi_r->requires_grad)
      kernels::matmul_tn(gpr.data(), u->v(), wc.wi_r->grad.data(), K, D, din,
                         true);
    if (wc.wi_z->requires_grad)
      kernels::matmul_tn(gpz.data(), u->v(), wc.wi_z->grad.data(), K, D, din,
                         true);
    if (wc.wi_n->requires_grad)
      kernels::matmul_tn(gpn.data(), u->v(), wc.wi_n->grad.data(), K, D, din,
                         true);
    if (wc.wh_r->requires_grad)
      kernels::matmul_tn(gpr.data(), h->v(), wc.wh_r->grad.data(), K, D, D,
                         true);
    if (wc.wh_z->requires_grad)
      kernels::matmul_tn(gpz.data(), h->v(), wc.wh_z->grad.data(), K, D, D,
                         true);
    if (wc.wh_n->requires_grad)
      kernels::matmul_tn(gq.data(), h->v(), wc.wh_n->grad.data(), K, D, D,
                         true);
    for (long k = 0; k < K; ++k)
      for (long d = 0; d < D; ++d) {
        const long i = k * D + d;
        if (wc.bi_r->requires_grad) wc.bi_r->grad[d] += gpr[i];
        if (wc.bh_r->requires_grad) wc.bh_r->grad[d] += gpr[i];
        if (wc.bi_z->requires_grad) wc.bi_z->grad[d] += gpz[i];
        if (wc.bh_z->requires_grad) wc.bh_z->grad[d] += gpz[i];
        if (wc.bi_n->requires_grad) wc.bi_n->grad[d] += gpn[i];
        if (wc.bh_n->requires_grad) wc.bh_n->grad[d] += gq[i];
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// linear: y = x * w^T + b, w stored (out x in). Cost: r*in*out + r*out.

Tensor Graph::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_2d(x, "linear");
  require_2d(w, "linear");
  if (x->shape[1] != w->shape[1])
    fail("linear: shape mismatch input " + shape_str(x->shape) +
         " vs weight " + shape_str(w->shape));
  const long r = x->shape[0], in = x->shape[1], out_dim = w->shape[0];
  require_vec_len(b, out_dim, "linear");
  Tensor out = result({r, out_dim},
                      x->requires_grad || w->requires_grad || b->requires_grad);
  kernels::matmul_nt(x->v(), w->v(), out->v(), r, in, out_dim, false);
  for (long i = 0; i < r; ++i)
    for (long o = 0; o < out_dim; ++o) out->v()[i * out_dim + o] += b->v()[o];
  count(static_cast<double>(r) * in * out_dim + static_cast<double>(r) * out_dim);
  push(out, [x, w, b, out, r, in, out_dim] {
    if (x->requires_grad)
      kernels::matmul(out->grad.data(), w->v(), x->grad.data(), r, out_dim, in,
                      true);
    if (w->requires_grad)
      kernels::matmul_tn(out->grad.data(), x->v(), w->grad.data(), r, out_dim,
                         in, true);
    if (b->requires_grad)
      for (long o = 0; o < out_dim; ++o)
        for (long i = 0; i < r; ++i) b->grad[o] += out->grad[i * out_dim + o];
  });
  return out;
}

Tensor Graph::mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  const long n = a->numel();
  if (n == 0) fail("mse: empty tensors");
  Tensor out = result({}, a->requires_grad || b->requires_grad);
  double s = 0;
  for (long i = 0; i < n; ++i) {
    const double d = a->v()[i] - b->v()[i];
    s += d * d;
  }
  out->v()[0] = s / static_cast<double>(n);
  count(2.0 * static_cast<double>(n));
  push(out, [a, b, out, n] {
    const double g = out->grad[0] * 2.0 / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double d = a->v()[i] - b->v()[i];
      if (a->requires_grad) a->grad[i] += g * d;
      if (b->requires_grad) b->grad[i] -= g * d;
    }
  });
  return out;
}

Tensor Graph::stopgrad(const Tensor& a) {
  Tensor out = result(a->shape, false);
  *out->val = *a->val;
  return out;
}

}  // namespace tdsa
