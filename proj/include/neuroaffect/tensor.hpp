#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace na {

// Dense fp64 tensor participating in a recorded computation graph.
// Ops create fresh nodes; backward() walks the tape in reverse topological
// order and accumulates gradients into every reachable node that asked for
// them. Recording can be suspended with NoGradGuard for inference.
class Tensor {
 public:
  struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pulls from this->grad into parents

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
      if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
  };

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data,
         bool requires_grad = false);

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size(std::size_t dim) const { return node_->shape[dim]; }
  std::size_t numel() const { return node_->data.size(); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad() { node_->ensure_grad(); return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  void zero_grad() { if (node_) node_->grad.assign(node_->data.size(), 0.0); }

  double item() const;  // scalar only

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Suspends graph recording within its scope (eval-mode forward passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// --- elementwise suite ---------------------------------------------------
// Broadcast rule: shapes equal, or b's shape equals a trailing suffix of
// a's shape. Anything else is a hard shape error.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor log_clamped(const Tensor& x, double floor = 1e-12);

// --- linear algebra / nn primitives --------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n]
Tensor transpose(const Tensor& x);                // 2-D
// input [C_in×L], kernels [C_out×C_in×K], bias [C_out]; cross-correlation.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t padding);
Tensor softmax(const Tensor& x, std::size_t axis);
// Normalizes the last dimension of a 1-D or 2-D tensor, then applies the
// affine (gain, bias), both shaped [H].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
// x [T×H] -> [2H] = [mean over T, max over T].
Tensor pool_avg_max(const Tensor& x);

// --- structural ops -------------------------------------------------------
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor concat_rows(const std::vector<Tensor>& parts);  // 2-D, same width
Tensor concat_cols(const std::vector<Tensor>& parts);  // 2-D, same height
Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor sum(const Tensor& x);  // -> scalar
// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937& rng);

// Runs reverse-mode accumulation from a scalar loss. Gradients accumulate
// (call zero_grad on parameters between steps). Returns the number of graph
// nodes visited; each node is visited exactly once.
std::size_t backward(const Tensor& loss);

// --- gradient verification harness ---------------------------------------
struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // points straddling a nondifferentiable kink
};

// f re-evaluates the scalar loss from the current parameter values.
// Analytic gradients are taken from one recorded backward pass and compared
// against central differences per parameter element. Elements whose two
// one-sided differences disagree strongly (a kink inside [x-eps, x+eps])
// are excluded rather than reported as failures.
FiniteDiffReport finite_diff_check(const std::function<Tensor()>& f,
                                   std::vector<Tensor> params,
                                   double eps = 1e-5);

}  // namespace na
