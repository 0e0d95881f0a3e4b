#include "bgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>

namespace bgen {

namespace {

thread_local bool g_autograd_enabled = true;

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor: non-positive extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got shape " + shape_str(t.shape()));
  }
}

}  // namespace

bool autograd_enabled() { return g_autograd_enabled; }

NoGrad::NoGrad() : saved_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGrad::~NoGrad() { g_autograd_enabled = saved_; }

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---- Tensor ----

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data.assign(n, value);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(n, 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw std::invalid_argument("tensor: value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(n, 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw std::logic_error("tensor: use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("tensor: use of undefined tensor");
  return *impl_;
}

const std::vector<int>& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::numel() const { return impl().data.size(); }

int Tensor::rows() const {
  require_rank2(*this, "rows");
  return impl().shape[0];
}

int Tensor::cols() const {
  require_rank2(*this, "cols");
  return impl().shape[1];
}

std::vector<double>& Tensor::values() { return impl().data; }
const std::vector<double>& Tensor::values() const { return impl().data; }
bool Tensor::requires_grad() const { return impl().requires_grad; }

std::vector<double>& Tensor::grad() {
  if (!impl().requires_grad) throw std::logic_error("tensor: gradient of untracked tensor");
  return impl().grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!impl().requires_grad) throw std::logic_error("tensor: gradient of untracked tensor");
  return impl().grad;
}

void Tensor::zero_grad() {
  if (impl().requires_grad) std::fill(impl().grad.begin(), impl().grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar shape " + shape_str(shape()));
  return impl().data[0];
}

double Tensor::at(int r, int c) const {
  require_rank2(*this, "at");
  return impl().data[static_cast<std::size_t>(r) * impl().shape[1] + c];
}

double& Tensor::at(int r, int c) {
  require_rank2(*this, "at");
  return impl().data[static_cast<std::size_t>(r) * impl().shape[1] + c];
}

const std::shared_ptr<TapeNode>& Tensor::node() const { return impl().node; }

bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t)) throw std::runtime_error("non-finite values in " + what);
}

// Builds the output tensor of an op and records the node when any input is
// tracked and recording is on.
Tensor make_op_result(const char* op, std::vector<int> shape, std::vector<Tensor> inputs,
                      std::function<void(const Tensor&)> backward_fn) {
  bool track = false;
  if (g_autograd_enabled) {
    for (const Tensor& in : inputs) track = track || in.requires_grad();
  }
  Tensor out = Tensor::zeros(std::move(shape), track);
  if (track) {
    auto node = std::make_shared<TapeNode>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
    out.impl_->node = std::move(node);
  }
  return out;
}

// ---- elementwise and shape ops ----

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = make_op_result("add", a.shape(), {a, b}, [a, b](const Tensor& o) {
    const auto& og = o.grad();
    if (a.requires_grad()) {
      auto& ga = const_cast<Tensor&>(a).grad();
      for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i];
    }
    if (b.requires_grad()) {
      auto& gb = const_cast<Tensor&>(b).grad();
      for (std::size_t i = 0; i < og.size(); ++i) gb[i] += og[i];
    }
  });
  const auto& va = a.values();
  const auto& vb = b.values();
  auto& vo = out.values();
  for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] + vb[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = make_op_result("mul", a.shape(), {a, b}, [a, b](const Tensor& o) {
    const auto& og = o.grad();
    if (a.requires_grad()) {
      auto& ga = const_cast<Tensor&>(a).grad();
      const auto& vb = b.values();
      for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * vb[i];
    }
    if (b.requires_grad()) {
      auto& gb = const_cast<Tensor&>(b).grad();
      const auto& va = a.values();
      for (std::size_t i = 0; i < og.size(); ++i) gb[i] += og[i] * va[i];
    }
  });
  const auto& va = a.values();
  const auto& vb = b.values();
  auto& vo = out.values();
  for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = va[i] * vb[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = make_op_result("scale", a.shape(), {a}, [a, c](const Tensor& o) {
    if (!a.requires_grad()) return;
    const auto& og = o.grad();
    auto& ga = const_cast<Tensor&>(a).grad();
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += c * og[i];
  });
  const auto& va = a.values();
  auto& vo = out.values();
  for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = c * va[i];
  return out;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_rank2(x, "add_row");
  const int n = x.rows(), d = x.cols();
  if (row.numel() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("add_row: row length " + shape_str(row.shape()) +
                                " does not match matrix " + shape_str(x.shape()));
  }
  Tensor out = make_op_result("add_row", x.shape(), {x, row}, [x, row, n, d](const Tensor& o) {
    const auto& og = o.grad();
    if (x.requires_grad()) {
      auto& gx = const_cast<Tensor&>(x).grad();
      for (std::size_t i = 0; i < og.size(); ++i) gx[i] += og[i];
    }
    if (row.requires_grad()) {
      auto& gr = const_cast<Tensor&>(row).grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gr[j] += og[static_cast<std::size_t>(i) * d + j];
    }
  });
  const auto& vx = x.values();
  const auto& vr = row.values();
  auto& vo = out.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) vo[static_cast<std::size_t>(i) * d + j] = vx[static_cast<std::size_t>(i) * d + j] + vr[j];
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const int m = a.rows(), n = a.cols();
  Tensor out = make_op_result("transpose", {n, m}, {a}, [a, m, n](const Tensor& o) {
    if (!a.requires_grad()) return;
    const auto& og = o.grad();
    auto& ga = const_cast<Tensor&>(a).grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) ga[static_cast<std::size_t>(j) * n + i] += og[static_cast<std::size_t>(i) * m + j];
  });
  const auto& va = a.values();
  auto& vo = out.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) vo[static_cast<std::size_t>(j) * m + i] = va[static_cast<std::size_t>(i) * n + j];
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_rows");
  require_rank2(b, "concat_rows");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("concat_rows: width mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int m = a.rows(), n = b.rows(), d = a.cols();
  Tensor out = make_op_result("concat_rows", {m + n, d}, {a, b}, [a, b, m, n, d](const Tensor& o) {
    const auto& og = o.grad();
    const std::size_t split = static_cast<std::size_t>(m) * d;
    if (a.requires_grad()) {
      auto& ga = const_cast<Tensor&>(a).grad();
      for (std::size_t i = 0; i < split; ++i) ga[i] += og[i];
    }
    if (b.requires_grad()) {
      auto& gb = const_cast<Tensor&>(b).grad();
      for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i) gb[i] += og[split + i];
    }
  });
  auto& vo = out.values();
  std::copy(a.values().begin(), a.values().end(), vo.begin());
  std::copy(b.values().begin(), b.values().end(), vo.begin() + static_cast<std::ptrdiff_t>(a.numel()));
  return out;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  require_rank2(x, "slice_cols");
  const int n = x.rows(), d = x.cols();
  if (start < 0 || len <= 0 || start + len > d) {
    throw std::invalid_argument("slice_cols: block [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") invalid for " + shape_str(x.shape()));
  }
  Tensor out = make_op_result("slice_cols", {n, len}, {x}, [x, start, len, n, d](const Tensor& o) {
    if (!x.requires_grad()) return;
    const auto& og = o.grad();
    auto& gx = const_cast<Tensor&>(x).grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < len; ++j)
        gx[static_cast<std::size_t>(i) * d + start + j] += og[static_cast<std::size_t>(i) * len + j];
  });
  const auto& vx = x.values();
  auto& vo = out.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < len; ++j)
      vo[static_cast<std::size_t>(i) * len + j] = vx[static_cast<std::size_t>(i) * d + start + j];
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("concat_cols: height mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const int n = a.rows(), da = a.cols(), db = b.cols();
  Tensor out = make_op_result("concat_cols", {n, da + db}, {a, b}, [a, b, n, da, db](const Tensor& o) {
    const auto& og = o.grad();
    const int d = da + db;
    if (a.requires_grad()) {
      auto& ga = const_cast<Tensor&>(a).grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < da; ++j)
          ga[static_cast<std::size_t>(i) * da + j] += og[static_cast<std::size_t>(i) * d + j];
    }
    if (b.requires_grad()) {
      auto& gb = const_cast<Tensor&>(b).grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < db; ++j)
          gb[static_cast<std::size_t>(i) * db + j] += og[static_cast<std::size_t>(i) * d + da + j];
    }
  });
  const auto& va = a.values();
  const auto& vb = b.values();
  auto& vo = out.values();
  const int d = da + db;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < da; ++j) vo[static_cast<std::size_t>(i) * d + j] = va[static_cast<std::size_t>(i) * da + j];
    for (int j = 0; j < db; ++j) vo[static_cast<std::size_t>(i) * d + da + j] = vb[static_cast<std::size_t>(i) * db + j];
  }
  return out;
}

Tensor pick_row(const Tensor& x, int row) {
  require_rank2(x, "pick_row");
  if (row < 0 || row >= x.rows()) {
    throw std::invalid_argument("pick_row: row " + std::to_string(row) + " out of range for " + shape_str(x.shape()));
  }
  const int d = x.cols();
  Tensor out = make_op_result("pick_row", {1, d}, {x}, [x, row, d](const Tensor& o) {
    if (!x.requires_grad()) return;
    const auto& og = o.grad();
    auto& gx = const_cast<Tensor&>(x).grad();
    for (int j = 0; j < d; ++j) gx[static_cast<std::size_t>(row) * d + j] += og[j];
  });
  const auto& vx = x.values();
  auto& vo = out.values();
  for (int j = 0; j < d; ++j) vo[j] = vx[static_cast<std::size_t>(row) * d + j];
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_rank2(table, "gather_rows");
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  const int v = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) + " out of range [0," +
                                  std::to_string(v) + ")");
    }
  }
  std::vector<int> idx(ids.begin(), ids.end());
  const int n = static_cast<int>(idx.size());
  Tensor out = make_op_result("gather_rows", {n, d}, {table}, [table, idx, d](const Tensor& o) {
    if (!table.requires_grad()) return;
    const auto& og = o.grad();
    auto& gt = const_cast<Tensor&>(table).grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < d; ++j) gt[static_cast<std::size_t>(idx[i]) * d + j] += og[i * d + j];
  });
  const auto& vt = table.values();
  auto& vo = out.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) vo[static_cast<std::size_t>(i) * d + j] = vt[static_cast<std::size_t>(idx[i]) * d + j];
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = make_op_result("sum", {1}, {x}, [x](const Tensor& o) {
    if (!x.requires_grad()) return;
    const double g = o.grad()[0];
    auto& gx = const_cast<Tensor&>(x).grad();
    for (double& gi : gx) gi += g;
  });
  double s = 0.0;
  for (double v : x.values()) s += v;
  out.values()[0] = s;
  return out;
}

// ---- core math ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_op_result("matmul", {m, n}, {a, b}, [a, b, m, k, n](const Tensor& o) {
    const auto& og = o.grad();
    if (a.requires_grad()) {
      // dA = dC * B^T
      auto& ga = const_cast<Tensor&>(a).grad();
      const auto& vb = b.values();
      for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
          double acc = 0.0;
          const std::size_t orow = static_cast<std::size_t>(i) * n;
          const std::size_t brow = static_cast<std::size_t>(l) * n;
          for (int j = 0; j < n; ++j) acc += og[orow + j] * vb[brow + j];
          ga[static_cast<std::size_t>(i) * k + l] += acc;
        }
      }
    }
    if (b.requires_grad()) {
      // dB = A^T * dC
      auto& gb = const_cast<Tensor&>(b).grad();
      const auto& va = a.values();
      for (int i = 0; i < m; ++i) {
        const std::size_t arow = static_cast<std::size_t>(i) * k;
        const std::size_t orow = static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
          const double ail = va[arow + l];
          if (ail == 0.0) continue;
          const std::size_t brow = static_cast<std::size_t>(l) * n;
          for (int j = 0; j < n; ++j) gb[brow + j] += ail * og[orow + j];
        }
      }
    }
  });
  const auto& va = a.values();
  const auto& vb = b.values();
  auto& vo = out.values();
  for (int i = 0; i < m; ++i) {
    const std::size_t arow = static_cast<std::size_t>(i) * k;
    const std::size_t orow = static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double ail = va[arow + l];
      if (ail == 0.0) continue;
      const std::size_t brow = static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) vo[orow + j] += ail * vb[brow + j];
    }
  }
  return out;
}

namespace {

// Softmax over contiguous or strided slices; shared by both axes.
void softmax_slices(const std::vector<double>& in, std::vector<double>& out, std::size_t n_slices,
                    std::size_t slice_len, std::size_t outer_stride, std::size_t inner_stride) {
  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::size_t base = s * outer_stride;
    double mx = in[base];
    for (std::size_t i = 1; i < slice_len; ++i) mx = std::max(mx, in[base + i * inner_stride]);
    double denom = 0.0;
    for (std::size_t i = 0; i < slice_len; ++i) {
      const double e = std::exp(in[base + i * inner_stride] - mx);
      out[base + i * inner_stride] = e;
      denom += e;
    }
    for (std::size_t i = 0; i < slice_len; ++i) out[base + i * inner_stride] /= denom;
  }
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const auto& shape = x.shape();
  if (shape.size() > 2) throw std::invalid_argument("softmax: rank > 2 unsupported");
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(shape));
  }
  // Normalize to (slices, len, strides) over the flat buffer.
  std::size_t n_slices, slice_len, outer_stride, inner_stride;
  if (shape.size() == 1) {
    n_slices = 1;
    slice_len = static_cast<std::size_t>(shape[0]);
    outer_stride = 0;
    inner_stride = 1;
  } else if (axis == 1) {
    n_slices = static_cast<std::size_t>(shape[0]);
    slice_len = static_cast<std::size_t>(shape[1]);
    outer_stride = slice_len;
    inner_stride = 1;
  } else {
    n_slices = static_cast<std::size_t>(shape[1]);
    slice_len = static_cast<std::size_t>(shape[0]);
    outer_stride = 1;
    inner_stride = static_cast<std::size_t>(shape[1]);
  }
  Tensor out = make_op_result(
      "softmax", shape, {x}, [x, n_slices, slice_len, outer_stride, inner_stride](const Tensor& o) {
        if (!x.requires_grad()) return;
        // dx_i = y_i * (dy_i - sum_j dy_j y_j) per slice
        const auto& og = o.grad();
        const auto& y = o.values();
        auto& gx = const_cast<Tensor&>(x).grad();
        for (std::size_t s = 0; s < n_slices; ++s) {
          const std::size_t base = s * outer_stride;
          double dot = 0.0;
          for (std::size_t i = 0; i < slice_len; ++i) {
            const std::size_t idx = base + i * inner_stride;
            dot += og[idx] * y[idx];
          }
          for (std::size_t i = 0; i < slice_len; ++i) {
            const std::size_t idx = base + i * inner_stride;
            gx[idx] += y[idx] * (og[idx] - dot);
          }
        }
      });
  softmax_slices(x.values(), out.values(), n_slices, slice_len, outer_stride, inner_stride);
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (eps <= 0) throw std::invalid_argument("layer_norm: eps must be positive");
  const auto& shape = x.shape();
  const int n = shape.size() == 2 ? shape[0] : 1;
  const int d = shape.size() == 2 ? shape[1] : shape[0];
  if (gamma.numel() != static_cast<std::size_t>(d) || beta.numel() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("layer_norm: gamma/beta length must match normalized extent " + std::to_string(d));
  }
  // Saved activations: normalized rows and per-row inverse stddev.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Tensor out = make_op_result(
      "layer_norm", shape, {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, n, d](const Tensor& o) {
        const auto& og = o.grad();
        const auto& vg = gamma.values();
        if (gamma.requires_grad()) {
          auto& gg = const_cast<Tensor&>(gamma).grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gg[j] += og[static_cast<std::size_t>(i) * d + j] * (*xhat)[static_cast<std::size_t>(i) * d + j];
        }
        if (beta.requires_grad()) {
          auto& gb = const_cast<Tensor&>(beta).grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gb[j] += og[static_cast<std::size_t>(i) * d + j];
        }
        if (x.requires_grad()) {
          auto& gx = const_cast<Tensor&>(x).grad();
          for (int i = 0; i < n; ++i) {
            const std::size_t row = static_cast<std::size_t>(i) * d;
            double mean_gy = 0.0, mean_gy_xhat = 0.0;
            for (int j = 0; j < d; ++j) {
              const double gy = og[row + j] * vg[j];
              mean_gy += gy;
              mean_gy_xhat += gy * (*xhat)[row + j];
            }
            mean_gy /= d;
            mean_gy_xhat /= d;
            for (int j = 0; j < d; ++j) {
              const double gy = og[row + j] * vg[j];
              gx[row + j] += ((gy - mean_gy - (*xhat)[row + j] * mean_gy_xhat)) * (*inv_std)[i];
            }
          }
        }
      });
  const auto& vx = x.values();
  const auto& vg = gamma.values();
  const auto& vb = beta.values();
  auto& vo = out.values();
  for (int i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += vx[row + j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = vx[row + j] - mean;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < d; ++j) {
      const double xh = (vx[row + j] - mean) * is;
      (*xhat)[row + j] = xh;
      vo[row + j] = vg[j] * xh + vb[j];
    }
  }
  return out;
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out = make_op_result("gelu", x.shape(), {x}, [x](const Tensor& o) {
    if (!x.requires_grad()) return;
    const auto& og = o.grad();
    const auto& vx = x.values();
    auto& gx = const_cast<Tensor&>(x).grad();
    for (std::size_t i = 0; i < vx.size(); ++i) {
      const double v = vx[i];
      const double u = kGeluC * (v + kGeluA * v * v * v);
      const double t = std::tanh(u);
      const double sech2 = 1.0 - t * t;
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx[i] += og[i] * (0.5 * (1.0 + t) + 0.5 * v * sech2 * du);
    }
  });
  const auto& vx = x.values();
  auto& vo = out.values();
  for (std::size_t i = 0; i < vx.size(); ++i) {
    const double v = vx[i];
    vo[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, int target) {
  const auto& shape = logits.shape();
  const bool vec = shape.size() == 1 || (shape.size() == 2 && shape[0] == 1);
  if (!vec) throw std::invalid_argument("cross_entropy: logits must be a vector, got " + shape_str(shape));
  const int v = static_cast<int>(logits.numel());
  if (target < 0 || target >= v) {
    throw std::invalid_argument("cross_entropy: target " + std::to_string(target) + " out of range [0," +
                                std::to_string(v) + ")");
  }
  // Saved softmax for the backward rule softmax(logits) - one_hot(target).
  auto probs = std::make_shared<std::vector<double>>(v);
  Tensor out = make_op_result("cross_entropy", {1}, {logits}, [logits, probs, target](const Tensor& o) {
    if (!logits.requires_grad()) return;
    const double g = o.grad()[0];
    auto& gl = const_cast<Tensor&>(logits).grad();
    for (std::size_t i = 0; i < probs->size(); ++i) {
      gl[i] += g * ((*probs)[i] - (static_cast<int>(i) == target ? 1.0 : 0.0));
    }
  });
  const auto& vx = logits.values();
  double mx = vx[0];
  for (int i = 1; i < v; ++i) mx = std::max(mx, vx[i]);
  double denom = 0.0;
  for (int i = 0; i < v; ++i) {
    (*probs)[i] = std::exp(vx[i] - mx);
    denom += (*probs)[i];
  }
  for (int i = 0; i < v; ++i) (*probs)[i] /= denom;
  out.values()[0] = -(vx[target] - mx - std::log(denom));
  return out;
}

// ---- backward engine ----

void backward(const Tensor& root) {
  if (root.numel() != 1) throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root.shape()));
  if (!root.node()) throw std::invalid_argument("backward: root was not produced by tracked operations");

  // Post-order DFS over tape nodes; each output tensor carries its node.
  std::vector<Tensor> order;
  std::unordered_set<const TapeNode*> seen;
  struct Frame {
    Tensor t;
    std::size_t next_input = 0;
  };
  std::vector<Frame> stack;
  seen.insert(root.node().get());
  stack.push_back({root});
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& node = f.t.node();
    if (f.next_input < node->inputs.size()) {
      const Tensor& in = node->inputs[f.next_input++];
      if (in.node() && !seen.count(in.node().get())) {
        seen.insert(in.node().get());
        stack.push_back({in});
      }
    } else {
      order.push_back(f.t);
      stack.pop_back();
    }
  }

  // Intermediates restart from zero each sweep; leaves keep accumulating.
  for (Tensor& t : order) t.zero_grad();
  const_cast<Tensor&>(root).grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    it->node()->backward(*it);
  }
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double step) {
  if (step <= 0) throw std::invalid_argument("grad_check: step must be positive");
  for (Tensor& p : params) p.zero_grad();
  Tensor root = f();
  if (!std::isfinite(root.item())) throw std::runtime_error("grad_check: non-finite function value");
  backward(root);

  double max_err = 0.0;
  for (Tensor& p : params) {
    const std::vector<double> analytic = p.grad();
    auto& vals = p.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      double fp, fm;
      {
        NoGrad ng;
        vals[i] = saved + step;
        fp = f().item();
        vals[i] = saved - step;
        fm = f().item();
      }
      vals[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("grad_check: non-finite function value during perturbation");
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
      max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return max_err;
}

}  // namespace bgen
