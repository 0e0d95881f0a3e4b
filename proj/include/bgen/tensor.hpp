#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bgen {

class Tensor;

// One recorded operation on the tape. `inputs` holds the upstream tensors so
// the graph stays alive as long as any downstream result does. `backward`
// reads the output's gradient and adds each input's contribution into its
// gradient buffer; saved activations live in the closure.
struct TapeNode {
  const char* op = "";
  std::vector<Tensor> inputs;
  std::function<void(const Tensor& out)> backward;
};

// Tape recording is a per-thread switch; a tape and its tensors are confined
// to the thread that built them.
bool autograd_enabled();

// Turns tape recording off for the current thread while alive.
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool saved_;
};

// Dense row-major tensor of 64-bit floats, rank 1 or 2. Copies are shallow:
// they alias the same value and gradient buffers, which is what ties
// parameter tensors on the tape to the optimizer's view of them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  std::size_t numel() const;
  int rows() const;
  int cols() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  bool requires_grad() const;
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;
  double at(int r, int c) const;
  double& at(int r, int c);

  const std::shared_ptr<TapeNode>& node() const;
  // Stable identity of the underlying storage (aliasing check in tests).
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::shared_ptr<TapeNode> node;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  Impl& impl();
  const Impl& impl() const;

  std::shared_ptr<Impl> impl_;

  friend Tensor make_op_result(const char* op, std::vector<int> shape,
                               std::vector<Tensor> inputs,
                               std::function<void(const Tensor&)> backward_fn);
};

std::string shape_str(const std::vector<int>& shape);
bool all_finite(const Tensor& t);
void check_finite(const Tensor& t, const std::string& what);

// Allocates the output of an op and, when recording is on and any input is
// tracked, attaches a tape node wired to `backward_fn`. Building block for
// every op below and for any caller that needs a custom differentiable op.
Tensor make_op_result(const char* op, std::vector<int> shape, std::vector<Tensor> inputs,
                      std::function<void(const Tensor&)> backward_fn);

// ---- elementwise and shape ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// Broadcast-add a length-d row vector to every row of a [n x d] matrix.
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor transpose(const Tensor& a);
Tensor concat_rows(const Tensor& a, const Tensor& b);
// Column block [start, start+len) of a matrix (head split in attention).
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor pick_row(const Tensor& x, int row);
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor sum(const Tensor& x);

// ---- core math ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor gelu(const Tensor& x);
Tensor cross_entropy(const Tensor& logits, int target);

// Reverse-mode sweep from a tracked scalar. Gradients of leaf tensors
// accumulate across calls; intermediate gradients are reset per sweep.
void backward(const Tensor& root);

// Central finite differences against the analytic gradients of `params`.
// Returns max over coordinates of |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double step);

}  // namespace bgen
