#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tdsa {

// Dense 64-bit float array with a reverse-mode gradient slot. Values are
// held behind a shared_ptr so a parameter can be aliased into a worker
// thread (shared values, private gradient buffer).
struct TensorData {
  std::vector<long> shape;
  std::shared_ptr<std::vector<double>> val;
  std::vector<double> grad;  // always numel-sized, zero unless backward ran
  bool requires_grad = false;

  double* v() { return val->data(); }
  const double* v() const { return val->data(); }
  long numel() const { return static_cast<long>(val->size()); }
};

using Tensor = std::shared_ptr<TensorData>;

long shape_numel(const std::vector<long>& shape);
std::string shape_str(const std::vector<long>& shape);

Tensor make_tensor(std::vector<long> shape, bool requires_grad = false);
Tensor make_tensor(std::vector<long> shape, std::vector<double> values,
                   bool requires_grad = false);
Tensor full_like_shape(std::vector<long> shape, double value);
// Shares the value storage of `t`; fresh zeroed gradient buffer.
Tensor alias_tensor(const Tensor& t);
void zero_grad(const Tensor& t);

// Forward cost accounting, bucketed by pipeline stage. Units are
// multiply-adds for matmul-like ops plus fixed per-element charges for the
// remaining primitives (the exact charge table lives next to each op).
enum class Stage {
  adapter = 0,
  pass1 = 1,
  pathway = 2,
  pass2 = 3,
  decoder = 4,
  loss = 5,
  other = 6,
};
constexpr int kNumStages = 7;

struct FlopCounter {
  std::array<double, kNumStages> madds{};
  double& at(Stage s) { return madds[static_cast<int>(s)]; }
  double at(Stage s) const { return madds[static_cast<int>(s)]; }
  double total() const {
    double t = 0;
    for (double m : madds) t += m;
    return t;
  }
};

// Weight bundle for the fused GRU cell primitive. Matrices are stored
// (out x in) like every linear map in this codebase.
struct GruWeights {
  Tensor wi_r, wi_z, wi_n;  // D x d_in
  Tensor wh_r, wh_z, wh_n;  // D x D
  Tensor bi_r, bi_z, bi_n;  // D
  Tensor bh_r, bh_z, bh_n;  // D
};

// Records forward primitives on a tape and replays them in reverse for
// gradients. One Graph per forward pass; not thread-safe, but independent
// graphs on different threads are.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients of
  // tape-internal tensors are reset first; leaf gradients accumulate across
  // calls.
  void backward(const Tensor& loss);

  void set_flop_counter(FlopCounter* c) { flops_ = c; }
  void set_stage(Stage s) { stage_ = s; }
  Stage stage() const { return stage_; }
  void add_flops(double madds) { count(madds); }

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
  Tensor scale(const Tensor& a, double c);
  Tensor add_scalar(const Tensor& a, double c);
  Tensor add_rowvec(const Tensor& a, const Tensor& v);
  Tensor mul_rowvec(const Tensor& a, const Tensor& v);
  Tensor sub_colvec(const Tensor& a, const Tensor& v);
  Tensor div_colvec(const Tensor& a, const Tensor& v);
  Tensor sum_axis(const Tensor& a, int axis);
  Tensor mean_axis(const Tensor& a, int axis);
  Tensor softmax(const Tensor& a, int axis);
  Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                    double eps = 1e-5);
  Tensor relu(const Tensor& a);
  Tensor gelu(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor transpose(const Tensor& a);
  // M[k][n][d] = ms[k][n] * mc[k][d]
  Tensor outer_rows(const Tensor& ms, const Tensor& mc);
  // u[k][d] = sum_n at[k][n] * M[k][n][d] * v[n][d]; bit-compatible with
  // matmul(at, v) when M is all-ones.
  Tensor modulated_sum(const Tensor& at, const Tensor& m, const Tensor& v);
  Tensor gather_rows(const Tensor& table, const std::vector<long>& idx);
  // Forward: selected table rows. Backward: gradient passes straight
  // through to src; table receives none.
  Tensor ste_select(const Tensor& src, const Tensor& table,
                    const std::vector<long>& idx);
  Tensor slice_rows(const Tensor& a, long r0, long r1);
  Tensor slice_cols(const Tensor& a, long c0, long c1);
  Tensor concat_rows(const Tensor& a, const Tensor& b);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor gru_cell(const Tensor& u, const Tensor& h, const GruWeights& w);
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
  Tensor mse(const Tensor& a, const Tensor& b);
  Tensor stopgrad(const Tensor& a);

 private:
  struct Node {
    Tensor out;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
  bool record_;
  FlopCounter* flops_ = nullptr;
  Stage stage_ = Stage::other;

  void count(double madds) {
    if (flops_) flops_->at(stage_) += madds;
  }
  Tensor result(std::vector<long> shape, bool requires_grad);
  void push(Tensor out, std::function<void()> back);
};

}  // namespace tdsa
