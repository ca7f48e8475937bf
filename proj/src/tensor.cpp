#include "neuroaffect/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace na {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a,
                              const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " +
                              shape_str(a.shape()) + " and " +
                              shape_str(b.shape()));
}

// True when b's shape equals a trailing suffix of a's shape.
bool trailing_broadcastable(const std::vector<std::size_t>& a,
                            const std::vector<std::size_t>& b) {
  if (b.size() > a.size()) return false;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[b.size() - 1 - i] != a[a.size() - 1 - i]) return false;
  return true;
}

using NodePtr = std::shared_ptr<Tensor::Node>;

NodePtr make_node(std::vector<std::size_t> shape, std::vector<double> data) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

// Wires the output node into the tape when any input wants gradients and
// recording is on. Otherwise the op is a pure forward computation.
Tensor record(NodePtr out, std::vector<NodePtr> parents,
              std::function<void(Tensor::Node&)> backprop) {
  bool any = false;
  if (g_grad_enabled)
    for (const auto& p : parents)
      if (p && p->requires_grad) any = true;
  if (any) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
    for (auto& p : out->parents)
      if (p && p->requires_grad) p->ensure_grad();
  }
  return Tensor(std::move(out));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("Tensor: shape/data size mismatch");
  node_ = make_node(std::move(shape), std::move(data));
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->ensure_grad();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> d(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::vector<double> d(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item(): tensor is not scalar");
  return node_->data[0];
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// --- elementwise ----------------------------------------------------------

namespace {

Tensor binary_broadcast(const char* name, const Tensor& a, const Tensor& b,
                        double (*fwd)(double, double),
                        double (*da)(double, double),
                        double (*db)(double, double)) {
  if (!trailing_broadcastable(a.shape(), b.shape())) shape_error(name, a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i)
    out[i] = fwd(av[i], bv[i % bn]);
  auto an = a.node();
  auto bnode = b.node();
  auto o = make_node(a.shape(), std::move(out));
  return record(o, {an, bnode}, [an, bnode, da, db, bn](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const double g = self.grad[i];
      const double x = an->data[i];
      const double y = bnode->data[i % bn];
      if (an->requires_grad) an->grad[i] += g * da(x, y);
      if (bnode->requires_grad) bnode->grad[i % bn] += g * db(x, y);
    }
  });
}

Tensor unary(const Tensor& x, double (*fwd)(double), double (*dfdy)(double, double)) {
  // dfdy receives (input, output) so tanh/sigmoid can reuse the output.
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  auto xn = x.node();
  auto o = make_node(x.shape(), std::move(out));
  return record(o, {xn}, [xn, dfdy](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i)
      xn->grad[i] += self.grad[i] * dfdy(xn->data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor relu(const Tensor& x) {
  // relu'(0) = 0
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_op(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor scale(const Tensor& x, double c) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * c;
  auto xn = x.node();
  auto o = make_node(x.shape(), std::move(out));
  return record(o, {xn}, [xn, c](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i)
      xn->grad[i] += self.grad[i] * c;
  });
}

Tensor log_clamped(const Tensor& x, double floor) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i)
    out[i] = std::log(std::max(xv[i], floor));
  auto xn = x.node();
  auto o = make_node(x.shape(), std::move(out));
  return record(o, {xn}, [xn, floor](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i)
      if (xn->data[i] > floor)
        xn->grad[i] += self.grad[i] / xn->data[i];
  });
}

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.size(1) != b.size(0))
    shape_error("matmul", a, b);
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        out[i * n + j] += aip * bv[p * n + j];
    }
  auto an = a.node();
  auto bn = b.node();
  auto o = make_node({m, n}, std::move(out));
  return record(o, {an, bn}, [an, bn, m, k, n](Tensor::Node& self) {
    // dA = dC·Bᵀ, dB = Aᵀ·dC
    if (an->requires_grad)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += self.grad[i * n + j] * bn->data[p * n + j];
          an->grad[i * k + p] += acc;
        }
    if (bn->requires_grad)
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i)
            acc += an->data[i * k + p] * self.grad[i * n + j];
          bn->grad[p * n + j] += acc;
        }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2)
    throw std::invalid_argument("transpose: expected 2-D tensor");
  const std::size_t r = x.size(0), c = x.size(1);
  const auto& xv = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  auto xn = x.node();
  auto o = make_node({c, r}, std::move(out));
  return record(o, {xn}, [xn, r, c](Tensor::Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        xn->grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  if (input.rank() != 2 || kernels.rank() != 3)
    throw std::invalid_argument("conv1d: input must be [C_in x L], kernels [C_out x C_in x K]");
  const std::size_t c_in = input.size(0), len = input.size(1);
  const std::size_t c_out = kernels.size(0), kc = kernels.size(1), kw = kernels.size(2);
  if (kc != c_in) shape_error("conv1d", input, kernels);
  if (bias.numel() != c_out)
    throw std::invalid_argument("conv1d: bias length must equal C_out");
  if (stride == 0) throw std::invalid_argument("conv1d: stride must be > 0");
  if (kw > len + 2 * padding)
    throw std::invalid_argument("conv1d: kernel larger than padded input");
  const std::size_t l_out = (len + 2 * padding - kw) / stride + 1;

  const auto& xv = input.data();
  const auto& wv = kernels.data();
  const auto& bv = bias.data();
  std::vector<double> out(c_out * l_out, 0.0);
  for (std::size_t oc = 0; oc < c_out; ++oc)
    for (std::size_t t = 0; t < l_out; ++t) {
      double acc = bv[oc];
      for (std::size_t ic = 0; ic < c_in; ++ic)
        for (std::size_t k = 0; k < kw; ++k) {
          const std::ptrdiff_t pos =
              static_cast<std::ptrdiff_t>(t * stride + k) -
              static_cast<std::ptrdiff_t>(padding);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
          acc += wv[(oc * c_in + ic) * kw + k] * xv[ic * len + pos];
        }
      out[oc * l_out + t] = acc;
    }
  auto xn = input.node();
  auto wn = kernels.node();
  auto bn = bias.node();
  auto o = make_node({c_out, l_out}, std::move(out));
  return record(o, {xn, wn, bn},
                [xn, wn, bn, c_in, len, c_out, kw, l_out, stride,
                 padding](Tensor::Node& self) {
    for (std::size_t oc = 0; oc < c_out; ++oc)
      for (std::size_t t = 0; t < l_out; ++t) {
        const double g = self.grad[oc * l_out + t];
        if (bn->requires_grad) bn->grad[oc] += g;
        for (std::size_t ic = 0; ic < c_in; ++ic)
          for (std::size_t k = 0; k < kw; ++k) {
            const std::ptrdiff_t pos =
                static_cast<std::ptrdiff_t>(t * stride + k) -
                static_cast<std::ptrdiff_t>(padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
            if (wn->requires_grad)
              wn->grad[(oc * c_in + ic) * kw + k] += g * xn->data[ic * len + pos];
            if (xn->requires_grad)
              xn->grad[ic * len + pos] += g * wn->data[(oc * c_in + ic) * kw + k];
          }
      }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (x.rank() > 2 || axis >= x.rank())
    throw std::invalid_argument("softmax: expected 1-D/2-D tensor with valid axis");
  if (x.rank() == 2 && axis == 0) return transpose(softmax(transpose(x), 1));

  const std::size_t rows = x.rank() == 2 ? x.size(0) : 1;
  const std::size_t cols = x.rank() == 2 ? x.size(1) : x.size(0);
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = xv[i * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xv[i * cols + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = std::exp(xv[i * cols + j] - mx);
      z += out[i * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] /= z;
  }
  auto xn = x.node();
  auto o = make_node(x.shape(), std::move(out));
  return record(o, {xn}, [xn, rows, cols](Tensor::Node& self) {
    // dx = y ⊙ (dy − <dy, y>) per row
    for (std::size_t i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j)
        dot += self.grad[i * cols + j] * self.data[i * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        xn->grad[i * cols + j] +=
            self.data[i * cols + j] * (self.grad[i * cols + j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (x.rank() > 2) throw std::invalid_argument("layer_norm: expected 1-D/2-D");
  const std::size_t rows = x.rank() == 2 ? x.size(0) : 1;
  const std::size_t h = x.rank() == 2 ? x.size(1) : x.size(0);
  if (gain.numel() != h || bias.numel() != h)
    throw std::invalid_argument("layer_norm: gain/bias width mismatch");
  const auto& xv = x.data();
  const auto& gv = gain.data();
  const auto& bv = bias.data();
  std::vector<double> out(xv.size());
  // xhat cached for backward
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < h; ++j) mean += xv[i * h + j];
    mean /= h;
    double var = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double d = xv[i * h + j] - mean;
      var += d * d;
    }
    var /= h;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[i] = is;
    for (std::size_t j = 0; j < h; ++j) {
      (*xhat)[i * h + j] = (xv[i * h + j] - mean) * is;
      out[i * h + j] = gv[j] * (*xhat)[i * h + j] + bv[j];
    }
  }
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  auto o = make_node(x.shape(), std::move(out));
  return record(o, {xn, gn, bn},
                [xn, gn, bn, xhat, inv_sigma, rows, h](Tensor::Node& self) {
    for (std::size_t i = 0; i < rows; ++i) {
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        const double dy = self.grad[i * h + j];
        const double xh = (*xhat)[i * h + j];
        const double dxh = dy * gn->data[j];
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xh;
        if (gn->requires_grad) gn->grad[j] += dy * xh;
        if (bn->requires_grad) bn->grad[j] += dy;
      }
      if (xn->requires_grad) {
        const double is = (*inv_sigma)[i];
        for (std::size_t j = 0; j < h; ++j) {
          const double dy = self.grad[i * h + j];
          const double xh = (*xhat)[i * h + j];
          const double dxh = dy * gn->data[j];
          xn->grad[i * h + j] +=
              is * (dxh - sum_dxhat / h - xh * sum_dxhat_xhat / h);
        }
      }
    }
  });
}

Tensor pool_avg_max(const Tensor& x) {
  if (x.rank() != 2 || x.size(0) == 0)
    throw std::invalid_argument("pool_avg_max: expected nonempty [T x H]");
  const std::size_t t = x.size(0), h = x.size(1);
  const auto& xv = x.data();
  std::vector<double> out(2 * h);
  auto argmax = std::make_shared<std::vector<std::size_t>>(h, 0);
  for (std::size_t j = 0; j < h; ++j) {
    double mean = 0.0, mx = xv[j];
    std::size_t best = 0;
    for (std::size_t i = 0; i < t; ++i) {
      const double v = xv[i * h + j];
      mean += v;
      if (v > mx) { mx = v; best = i; }
    }
    out[j] = mean / t;
    out[h + j] = mx;
    (*argmax)[j] = best;
  }
  auto xn = x.node();
  auto o = make_node({2 * h}, std::move(out));
  return record(o, {xn}, [xn, argmax, t, h](Tensor::Node& self) {
    for (std::size_t j = 0; j < h; ++j) {
      for (std::size_t i = 0; i < t; ++i)
        xn->grad[i * h + j] += self.grad[j] / t;
      xn->grad[(*argmax)[j] * h + j] += self.grad[h + j];
    }
  });
}

// --- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  auto xn = x.node();
  auto o = make_node(std::move(shape), x.data());
  return record(o, {xn}, [xn](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i)
      xn->grad[i] += self.grad[i];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const std::size_t cols = parts[0].rank() == 2 ? parts[0].size(1)
                                                : parts[0].size(0);
  std::vector<double> out;
  std::vector<NodePtr> nodes;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    const std::size_t pr = p.rank() == 2 ? p.size(0) : 1;
    const std::size_t pc = p.rank() == 2 ? p.size(1) : p.size(0);
    if (pc != cols) throw std::invalid_argument("concat_rows: width mismatch");
    rows += pr;
    out.insert(out.end(), p.data().begin(), p.data().end());
    nodes.push_back(p.node());
  }
  auto o = make_node({rows, cols}, std::move(out));
  return record(o, nodes, [nodes](Tensor::Node& self) {
    std::size_t off = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad)
        for (std::size_t i = 0; i < n->data.size(); ++i)
          n->grad[i] += self.grad[off + i];
      off += n->data.size();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const std::size_t rows = parts[0].size(0);
  std::size_t cols = 0;
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.size(0) != rows)
      throw std::invalid_argument("concat_cols: height mismatch");
    widths.push_back(p.size(1));
    cols += p.size(1);
    nodes.push_back(p.node());
  }
  std::vector<double> out(rows * cols);
  std::size_t off = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * cols + off + j] = nodes[k]->data[i * widths[k] + j];
    off += widths[k];
  }
  auto o = make_node({rows, cols}, std::move(out));
  return record(o, nodes, [nodes, widths, rows, cols](Tensor::Node& self) {
    std::size_t off2 = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k]->requires_grad)
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            nodes[k]->grad[i * widths[k] + j] += self.grad[i * cols + off2 + j];
      off2 += widths[k];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
  if (x.rank() != 2 || r1 > x.size(0) || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  const std::size_t cols = x.size(1);
  std::vector<double> out(x.data().begin() + r0 * cols,
                          x.data().begin() + r1 * cols);
  auto xn = x.node();
  auto o = make_node({r1 - r0, cols}, std::move(out));
  return record(o, {xn}, [xn, r0, cols](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i)
      xn->grad[r0 * cols + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  if (x.rank() != 2 || c1 > x.size(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const std::size_t rows = x.size(0), cols = x.size(1), w = c1 - c0;
  std::vector<double> out(rows * w);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out[i * w + j] = x.data()[i * cols + c0 + j];
  auto xn = x.node();
  auto o = make_node({rows, w}, std::move(out));
  return record(o, {xn}, [xn, c0, rows, cols, w](Tensor::Node& self) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < w; ++j)
        xn->grad[i * cols + c0 + j] += self.grad[i * w + j];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto xn = x.node();
  auto o = make_node({1}, {acc});
  return record(o, {xn}, [xn](Tensor::Node& self) {
    for (std::size_t i = 0; i < xn->data.size(); ++i)
      xn->grad[i] += self.grad[0];
  });
}

Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  for (auto& m : *mask) m = keep(rng) ? inv : 0.0;
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * (*mask)[i];
  auto xn = x.node();
  auto o = make_node(x.shape(), std::move(out));
  return record(o, {xn}, [xn, mask](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i)
      xn->grad[i] += self.grad[i] * (*mask)[i];
  });
}

// --- backward -------------------------------------------------------------

std::size_t backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  auto root = loss.node();
  if (!root->requires_grad) return 0;

  // Iterative post-order DFS producing a topological order.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> seen;
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Tensor::Node* p = node->parents[idx++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  std::size_t visited = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    ++visited;
    if ((*it)->backprop) (*it)->backprop(**it);
  }
  return visited;
}

// --- finite differences ---------------------------------------------------

FiniteDiffReport finite_diff_check(const std::function<Tensor()>& f,
                                   std::vector<Tensor> params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be > 0");
  for (auto& p : params) p.zero_grad();
  Tensor loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  FiniteDiffReport rep;
  NoGradGuard ng;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi].data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double x0 = vals[i];
      vals[i] = x0 + eps;
      const double fp = f().item();
      vals[i] = x0 - eps;
      const double fm = f().item();
      vals[i] = x0;
      const double f0 = f().item();
      const double central = (fp - fm) / (2.0 * eps);
      const double right = (fp - f0) / eps;
      const double left = (f0 - fm) / eps;
      // A kink between x-eps and x+eps makes the one-sided slopes disagree.
      const double side_gap = std::abs(right - left);
      if (side_gap > 0.1 * std::max(1.0, std::abs(central))) {
        ++rep.excluded;
        continue;
      }
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(central), 1e-6});
      rep.max_rel_err = std::max(rep.max_rel_err, std::abs(a - central) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace na
