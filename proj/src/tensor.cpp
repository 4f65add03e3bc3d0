#include "cylocc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace cylocc {

namespace {

int64_t g_alloc_current = 0;
int64_t g_alloc_peak = 0;

void alloc_add(int64_t n) {
  g_alloc_current += n;
  g_alloc_peak = std::max(g_alloc_peak, g_alloc_current);
}

void alloc_sub(int64_t n) { g_alloc_current -= n; }

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

int64_t AllocStats::current() { return g_alloc_current; }
int64_t AllocStats::peak() { return g_alloc_peak; }
void AllocStats::reset_peak() { g_alloc_peak = g_alloc_current; }

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::vector<int64_t> row_major_strides(const Shape& shape) {
  std::vector<int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

// ---- Tensor -----------------------------------------------------------------

struct Tensor::Impl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // same size as value iff requires_grad
  bool requires_grad = false;

  Impl(Shape s, std::vector<double> v) : shape(std::move(s)), value(std::move(v)) {
    alloc_add(static_cast<int64_t>(value.size()));
  }
  ~Impl() {
    alloc_sub(static_cast<int64_t>(value.size()) +
              static_cast<int64_t>(grad.size()));
  }
  void enable_grad() {
    if (!requires_grad) {
      grad.assign(value.size(), 0.0);
      alloc_add(static_cast<int64_t>(grad.size()));
      requires_grad = true;
    }
  }
};

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  for (int64_t e : shape)
    if (e < 0) fail("tensor: negative extent in shape " + shape_str(shape));
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)), 0.0);
  Tensor t;
  t.impl_ = std::make_shared<Impl>(std::move(shape), std::move(v));
  if (requires_grad) t.impl_->enable_grad();
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl_->value.begin(), t.impl_->value.end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    fail("tensor: data length " + std::to_string(data.size()) +
         " does not match shape " + shape_str(shape));
  Tensor t;
  t.impl_ = std::make_shared<Impl>(std::move(shape), std::move(data));
  if (requires_grad) t.impl_->enable_grad();
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }
int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->value.size()); }
int64_t Tensor::extent(int axis) const { return impl_->shape.at(axis); }

std::span<const double> Tensor::data() const { return impl_->value; }
std::span<double> Tensor::mutable_data() { return impl_->value; }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (value)
    impl_->enable_grad();
  else if (impl_->requires_grad) {
    alloc_sub(static_cast<int64_t>(impl_->grad.size()));
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
    impl_->requires_grad = false;
  }
}

std::span<const double> Tensor::grad() const {
  return impl_->requires_grad ? std::span<const double>(impl_->grad)
                              : std::span<const double>();
}

std::span<double> Tensor::grad_mutable() {
  if (!impl_->requires_grad) fail("tensor: grad requested but requires_grad is off");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (!impl_->requires_grad) return;
  if (g.size() != impl_->grad.size())
    fail("tensor: gradient size mismatch");
  for (size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
}

double Tensor::item() const {
  if (numel() != 1) fail("tensor: item() on non-scalar shape " + shape_str(shape()));
  return impl_->value[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const auto strides = row_major_strides(impl_->shape);
  if (idx.size() != impl_->shape.size()) fail("tensor: at() rank mismatch");
  int64_t off = 0;
  int axis = 0;
  for (int64_t i : idx) off += i * strides[axis++];
  return impl_->value[static_cast<size_t>(off)];
}

// ---- Graph: parameters and tape ----------------------------------------------

Tensor Graph::add_parameter(const std::string& name, Tensor init) {
  if (has_parameter(name)) fail("graph: duplicate parameter '" + name + "'");
  init.set_requires_grad(true);
  param_order_.push_back(name);
  param_tensors_.push_back(init);
  return init;
}

Tensor Graph::parameter(const std::string& name) const {
  for (size_t i = 0; i < param_order_.size(); ++i)
    if (param_order_[i] == name) return param_tensors_[i];
  fail("graph: unknown parameter '" + name + "'");
}

bool Graph::has_parameter(const std::string& name) const {
  return std::find(param_order_.begin(), param_order_.end(), name) !=
         param_order_.end();
}

void Graph::reset() {
  nodes_.clear();
  backward_done_ = false;
  for (auto& p : param_tensors_) p.zero_grad();
}

void Graph::record(std::unique_ptr<Node> node) { nodes_.push_back(std::move(node)); }

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    fail("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (backward_done_)
    throw std::logic_error("backward: called twice without reset");
  backward_done_ = true;
  if (!loss.requires_grad()) return;  // constant graph: all grads stay zero
  Tensor seed = loss;
  seed.grad_mutable()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward();
}

// ---- op nodes ----------------------------------------------------------------

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
}

int normalize_axis(const char* op, int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    fail(std::string(op) + ": axis " + std::to_string(axis) +
         " out of range for rank " + std::to_string(rank));
  return axis;
}

// outer * n * inner decomposition around one axis
struct AxisSplit {
  int64_t outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

struct EwBinaryNode : Node {
  // kind 0: add, 1: sub, 2: mul
  EwBinaryNode(int which, Tensor a, Tensor b, Tensor out)
      : Node(which == 0 ? "add" : which == 1 ? "sub" : "mul"),
        which_(which), a_(std::move(a)), b_(std::move(b)), out_(std::move(out)) {}
  void backward() override {
    auto g = out_.grad();
    const int64_t n = out_.numel();
    if (a_.requires_grad()) {
      auto ga = a_.grad_mutable();
      if (which_ == 2) {
        auto bv = b_.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
      } else {
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
    }
    if (b_.requires_grad()) {
      auto gb = b_.grad_mutable();
      if (which_ == 2) {
        auto av = a_.data();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
      } else if (which_ == 1) {
        for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
      } else {
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    }
  }
  int which_;
  Tensor a_, b_, out_;
};

struct ScalarMulNode : Node {
  ScalarMulNode(Tensor a, double c, Tensor out)
      : Node("scalar_mul"), a_(std::move(a)), out_(std::move(out)), c_(c) {}
  void backward() override {
    if (!a_.requires_grad()) return;
    auto g = out_.grad();
    auto ga = a_.grad_mutable();
    for (int64_t i = 0; i < out_.numel(); ++i) ga[i] += c_ * g[i];
  }
  Tensor a_, out_;
  double c_;
};

struct MatmulNode : Node {
  MatmulNode(Tensor a, Tensor b, Tensor out)
      : Node("matmul"), a_(std::move(a)), b_(std::move(b)), out_(std::move(out)) {}
  void backward() override {
    const int64_t n = a_.extent(0), k = a_.extent(1), m = b_.extent(1);
    auto g = out_.grad();
    if (a_.requires_grad()) {
      auto ga = a_.grad_mutable();
      auto bv = b_.data();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t l = 0; l < k; ++l) {
          double acc = 0.0;
          for (int64_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[l * m + j];
          ga[i * k + l] += acc;
        }
    }
    if (b_.requires_grad()) {
      auto gb = b_.grad_mutable();
      auto av = a_.data();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t l = 0; l < k; ++l) {
          const double x = av[i * k + l];
          for (int64_t j = 0; j < m; ++j) gb[l * m + j] += x * g[i * m + j];
        }
    }
  }
  Tensor a_, b_, out_;
};

struct LinearNode : Node {
  LinearNode(Tensor x, Tensor w, Tensor b, Tensor out)
      : Node("linear"), x_(std::move(x)), w_(std::move(w)), b_(std::move(b)),
        out_(std::move(out)) {}
  void backward() override {
    const int64_t n = x_.extent(0), k = x_.extent(1), m = w_.extent(1);
    auto g = out_.grad();
    if (x_.requires_grad()) {
      auto gx = x_.grad_mutable();
      auto wv = w_.data();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t l = 0; l < k; ++l) {
          double acc = 0.0;
          for (int64_t j = 0; j < m; ++j) acc += g[i * m + j] * wv[l * m + j];
          gx[i * k + l] += acc;
        }
    }
    if (w_.requires_grad()) {
      auto gw = w_.grad_mutable();
      auto xv = x_.data();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t l = 0; l < k; ++l) {
          const double x = xv[i * k + l];
          for (int64_t j = 0; j < m; ++j) gw[l * m + j] += x * g[i * m + j];
        }
    }
    if (b_.defined() && b_.requires_grad()) {
      auto gb = b_.grad_mutable();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
    }
  }
  Tensor x_, w_, b_, out_;
};

// Resolves a padded coordinate to an input coordinate; returns -1 for a zero pad.
inline int64_t resolve_pad(int64_t idx, int64_t extent, PadMode mode) {
  if (idx >= 0 && idx < extent) return idx;
  if (mode == PadMode::kZero) return -1;
  int64_t w = idx % extent;
  if (w < 0) w += extent;
  return w;
}

struct Conv2dNode : Node {
  Conv2dNode(Tensor x, Tensor w, Tensor b, Tensor out, Conv2dSpec spec)
      : Node("conv2d"), x_(std::move(x)), w_(std::move(w)), b_(std::move(b)),
        out_(std::move(out)), spec_(spec) {}
  void backward() override {
    const int64_t n = x_.extent(0), ci = x_.extent(1), h = x_.extent(2),
                  wd = x_.extent(3);
    const int64_t co = w_.extent(0), kh = w_.extent(2), kw = w_.extent(3);
    const int64_t ho = out_.extent(2), wo = out_.extent(3);
    auto g = out_.grad();
    auto xv = x_.data();
    auto wv = w_.data();
    const bool gx = x_.requires_grad(), gw = w_.requires_grad();
    std::span<double> xg, wg;
    if (gx) xg = x_.grad_mutable();
    if (gw) wg = w_.grad_mutable();
    for (int64_t in = 0; in < n; ++in)
      for (int64_t oc = 0; oc < co; ++oc)
        for (int64_t oy = 0; oy < ho; ++oy)
          for (int64_t ox = 0; ox < wo; ++ox) {
            const double go = g[((in * co + oc) * ho + oy) * wo + ox];
            if (go == 0.0) continue;
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = resolve_pad(oy * spec_.stride - spec_.pad_h + ky,
                                             h, spec_.mode_h);
              if (iy < 0) continue;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t ix = resolve_pad(ox * spec_.stride - spec_.pad_w + kx,
                                               wd, spec_.mode_w);
                if (ix < 0) continue;
                for (int64_t ic = 0; ic < ci; ++ic) {
                  const int64_t xoff = ((in * ci + ic) * h + iy) * wd + ix;
                  const int64_t woff = ((oc * ci + ic) * kh + ky) * kw + kx;
                  if (gx) xg[xoff] += go * wv[woff];
                  if (gw) wg[woff] += go * xv[xoff];
                }
              }
            }
          }
    if (b_.defined() && b_.requires_grad()) {
      auto bg = b_.grad_mutable();
      for (int64_t in = 0; in < n; ++in)
        for (int64_t oc = 0; oc < co; ++oc)
          for (int64_t oy = 0; oy < ho; ++oy)
            for (int64_t ox = 0; ox < wo; ++ox)
              bg[oc] += g[((in * co + oc) * ho + oy) * wo + ox];
    }
  }
  Tensor x_, w_, b_, out_;
  Conv2dSpec spec_;
};

struct UnaryNode : Node {
  // 0 relu, 1 softplus, 2 sigmoid, 3 exp, 4 log (with floor)
  UnaryNode(int which, Tensor x, Tensor out, double floor = 0.0)
      : Node(which == 0   ? "relu"
             : which == 1 ? "softplus"
             : which == 2 ? "sigmoid"
             : which == 3 ? "exp"
                          : "log"),
        which_(which), x_(std::move(x)), out_(std::move(out)), floor_(floor) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    auto xv = x_.data();
    auto yv = out_.data();
    const int64_t n = x_.numel();
    switch (which_) {
      case 0:
        for (int64_t i = 0; i < n; ++i)
          if (xv[i] > 0.0) gx[i] += g[i];
        break;
      case 1:
        for (int64_t i = 0; i < n; ++i) {
          const double s = xv[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-xv[i]))
                                        : std::exp(xv[i]) / (1.0 + std::exp(xv[i]));
          gx[i] += g[i] * s;
        }
        break;
      case 2:
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
        break;
      case 3:
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * yv[i];
        break;
      case 4:
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i] / (xv[i] + floor_);
        break;
    }
  }
  int which_;
  Tensor x_, out_;
  double floor_;
};

struct SoftmaxNode : Node {
  SoftmaxNode(Tensor x, Tensor out, AxisSplit split)
      : Node("softmax"), x_(std::move(x)), out_(std::move(out)), split_(split) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    auto p = out_.data();
    for (int64_t o = 0; o < split_.outer; ++o)
      for (int64_t in = 0; in < split_.inner; ++in) {
        const int64_t base = o * split_.n * split_.inner + in;
        double dot = 0.0;
        for (int64_t j = 0; j < split_.n; ++j) {
          const int64_t off = base + j * split_.inner;
          dot += g[off] * p[off];
        }
        for (int64_t j = 0; j < split_.n; ++j) {
          const int64_t off = base + j * split_.inner;
          gx[off] += p[off] * (g[off] - dot);
        }
      }
  }
  Tensor x_, out_;
  AxisSplit split_;
};

struct MaxReduceNode : Node {
  MaxReduceNode(Tensor x, Tensor out, AxisSplit split, std::vector<int64_t> argmax)
      : Node("max_reduce"), x_(std::move(x)), out_(std::move(out)), split_(split),
        argmax_(std::move(argmax)) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    for (int64_t o = 0; o < split_.outer; ++o)
      for (int64_t in = 0; in < split_.inner; ++in) {
        const int64_t oi = o * split_.inner + in;
        const int64_t j = argmax_[oi];
        gx[(o * split_.n + j) * split_.inner + in] += g[oi];
      }
  }
  Tensor x_, out_;
  AxisSplit split_;
  std::vector<int64_t> argmax_;
};

struct MeanReduceNode : Node {
  MeanReduceNode(Tensor x, Tensor out, AxisSplit split)
      : Node("mean_reduce"), x_(std::move(x)), out_(std::move(out)), split_(split) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    const double inv = 1.0 / static_cast<double>(split_.n);
    for (int64_t o = 0; o < split_.outer; ++o)
      for (int64_t j = 0; j < split_.n; ++j)
        for (int64_t in = 0; in < split_.inner; ++in)
          gx[(o * split_.n + j) * split_.inner + in] +=
              g[o * split_.inner + in] * inv;
  }
  Tensor x_, out_;
  AxisSplit split_;
};

struct ConcatNode : Node {
  ConcatNode(std::vector<Tensor> parts, Tensor out, int axis)
      : Node("concat"), parts_(std::move(parts)), out_(std::move(out)), axis_(axis) {}
  void backward() override {
    auto g = out_.grad();
    const auto split_out = split_axis(out_.shape(), axis_);
    int64_t offset = 0;
    for (auto& p : parts_) {
      const auto sp = split_axis(p.shape(), axis_);
      if (p.requires_grad()) {
        auto gp = p.grad_mutable();
        for (int64_t o = 0; o < sp.outer; ++o)
          for (int64_t j = 0; j < sp.n; ++j)
            for (int64_t in = 0; in < sp.inner; ++in)
              gp[(o * sp.n + j) * sp.inner + in] +=
                  g[(o * split_out.n + offset + j) * sp.inner + in];
      }
      offset += sp.n;
    }
  }
  std::vector<Tensor> parts_;
  Tensor out_;
  int axis_;
};

struct SliceNode : Node {
  SliceNode(Tensor x, Tensor out, std::vector<int64_t> start)
      : Node("slice"), x_(std::move(x)), out_(std::move(out)), start_(std::move(start)) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    const auto in_strides = row_major_strides(x_.shape());
    const auto& os = out_.shape();
    const int rank = static_cast<int>(os.size());
    std::vector<int64_t> idx(rank, 0);
    for (int64_t flat = 0; flat < out_.numel(); ++flat) {
      int64_t src = 0;
      for (int a = 0; a < rank; ++a) src += (start_[a] + idx[a]) * in_strides[a];
      gx[src] += g[flat];
      for (int a = rank - 1; a >= 0; --a) {
        if (++idx[a] < os[a]) break;
        idx[a] = 0;
      }
    }
  }
  Tensor x_, out_;
  std::vector<int64_t> start_;
};

struct ReshapeNode : Node {
  ReshapeNode(Tensor x, Tensor out) : Node("reshape"), x_(std::move(x)), out_(std::move(out)) {}
  void backward() override {
    if (x_.requires_grad()) x_.accumulate_grad(out_.grad());
  }
  Tensor x_, out_;
};

struct TransposeNode : Node {
  TransposeNode(Tensor x, Tensor out, std::vector<int> perm)
      : Node("transpose"), x_(std::move(x)), out_(std::move(out)), perm_(std::move(perm)) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    const auto in_strides = row_major_strides(x_.shape());
    const auto& os = out_.shape();
    const int rank = static_cast<int>(os.size());
    std::vector<int64_t> idx(rank, 0);
    for (int64_t flat = 0; flat < out_.numel(); ++flat) {
      int64_t src = 0;
      for (int a = 0; a < rank; ++a) src += idx[a] * in_strides[perm_[a]];
      gx[src] += g[flat];
      for (int a = rank - 1; a >= 0; --a) {
        if (++idx[a] < os[a]) break;
        idx[a] = 0;
      }
    }
  }
  Tensor x_, out_;
  std::vector<int> perm_;
};

struct GatherNode : Node {
  GatherNode(Tensor x, Tensor out, int axis, std::vector<int64_t> idx)
      : Node("gather"), x_(std::move(x)), out_(std::move(out)), axis_(axis),
        idx_(std::move(idx)) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    const auto sx = split_axis(x_.shape(), axis_);
    const int64_t m = static_cast<int64_t>(idx_.size());
    for (int64_t o = 0; o < sx.outer; ++o)
      for (int64_t j = 0; j < m; ++j)
        for (int64_t in = 0; in < sx.inner; ++in)
          gx[(o * sx.n + idx_[j]) * sx.inner + in] += g[(o * m + j) * sx.inner + in];
  }
  Tensor x_, out_;
  int axis_;
  std::vector<int64_t> idx_;
};

struct BroadcastNode : Node {
  BroadcastNode(Tensor x, Tensor out, Shape padded_src)
      : Node("broadcast"), x_(std::move(x)), out_(std::move(out)),
        padded_src_(std::move(padded_src)) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    const auto& os = out_.shape();
    const int rank = static_cast<int>(os.size());
    const auto src_strides = row_major_strides(padded_src_);
    std::vector<int64_t> idx(rank, 0);
    for (int64_t flat = 0; flat < out_.numel(); ++flat) {
      int64_t src = 0;
      for (int a = 0; a < rank; ++a)
        if (padded_src_[a] != 1) src += idx[a] * src_strides[a];
      gx[src] += g[flat];
      for (int a = rank - 1; a >= 0; --a) {
        if (++idx[a] < os[a]) break;
        idx[a] = 0;
      }
    }
  }
  Tensor x_, out_;
  Shape padded_src_;
};

struct BilinearCorner {
  int64_t off[4];
  double w[4];
};

struct BilinearNode : Node {
  BilinearNode(Tensor plane, Tensor out, std::vector<BilinearCorner> corners,
               int64_t channels)
      : Node("bilinear_sample_2d"), plane_(std::move(plane)), out_(std::move(out)),
        corners_(std::move(corners)), channels_(channels) {}
  void backward() override {
    if (!plane_.requires_grad()) return;
    auto g = out_.grad();
    auto gp = plane_.grad_mutable();
    const int64_t q = static_cast<int64_t>(corners_.size());
    for (int64_t i = 0; i < q; ++i) {
      const auto& c = corners_[i];
      for (int k = 0; k < 4; ++k) {
        if (c.w[k] == 0.0) continue;
        const int64_t base = c.off[k] * channels_;
        for (int64_t ch = 0; ch < channels_; ++ch)
          gp[base + ch] += c.w[k] * g[i * channels_ + ch];
      }
    }
  }
  Tensor plane_, out_;
  std::vector<BilinearCorner> corners_;
  int64_t channels_;
};

}  // namespace

// ---- op implementations -------------------------------------------------------

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::zeros(a.shape(), rg);
  auto ov = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  for (int64_t i = 0; i < out.numel(); ++i) ov[i] = av[i] + bv[i];
  if (rg) record(std::make_unique<EwBinaryNode>(0, a, b, out));
  return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::zeros(a.shape(), rg);
  auto ov = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  for (int64_t i = 0; i < out.numel(); ++i) ov[i] = av[i] - bv[i];
  if (rg) record(std::make_unique<EwBinaryNode>(1, a, b, out));
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::zeros(a.shape(), rg);
  auto ov = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  for (int64_t i = 0; i < out.numel(); ++i) ov[i] = av[i] * bv[i];
  if (rg) record(std::make_unique<EwBinaryNode>(2, a, b, out));
  return out;
}

Tensor Graph::scalar_mul(const Tensor& a, double c) {
  const bool rg = a.requires_grad();
  Tensor out = Tensor::zeros(a.shape(), rg);
  auto ov = out.mutable_data();
  auto av = a.data();
  for (int64_t i = 0; i < out.numel(); ++i) ov[i] = c * av[i];
  if (rg) record(std::make_unique<ScalarMulNode>(a, c, out));
  return out;
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    fail("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
  const int64_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::zeros({n, m}, rg);
  auto ov = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t l = 0; l < k; ++l) {
      const double x = av[i * k + l];
      if (x == 0.0) continue;
      for (int64_t j = 0; j < m; ++j) ov[i * m + j] += x * bv[l * m + j];
    }
  if (rg) record(std::make_unique<MatmulNode>(a, b, out));
  return out;
}

Tensor Graph::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.extent(1) != w.extent(0))
    fail("linear: incompatible shapes " + shape_str(x.shape()) + " vs " +
         shape_str(w.shape()));
  const int64_t n = x.extent(0), k = x.extent(1), m = w.extent(1);
  if (b.defined() && (b.rank() != 1 || b.extent(0) != m))
    fail("linear: bias shape " + shape_str(b.shape()) + " does not match output width " +
         std::to_string(m));
  const bool rg =
      x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad());
  Tensor out = Tensor::zeros({n, m}, rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  auto wv = w.data();
  if (b.defined()) {
    auto bv = b.data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < m; ++j) ov[i * m + j] = bv[j];
  }
  for (int64_t i = 0; i < n; ++i)
    for (int64_t l = 0; l < k; ++l) {
      const double xx = xv[i * k + l];
      if (xx == 0.0) continue;
      for (int64_t j = 0; j < m; ++j) ov[i * m + j] += xx * wv[l * m + j];
    }
  if (rg) record(std::make_unique<LinearNode>(x, w, b, out));
  return out;
}

Tensor Graph::conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
                     const Conv2dSpec& spec) {
  if (x.rank() != 4 || w.rank() != 4)
    fail("conv2d: expected 4D input and kernel, got " + shape_str(x.shape()) +
         " and " + shape_str(w.shape()));
  if (x.extent(1) != w.extent(1))
    fail("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
         shape_str(w.shape()));
  if (spec.stride != 1 && spec.stride != 2) fail("conv2d: stride must be 1 or 2");
  const int64_t n = x.extent(0), ci = x.extent(1), h = x.extent(2), wd = x.extent(3);
  const int64_t co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  const int64_t ho = (h + 2 * spec.pad_h - kh) / spec.stride + 1;
  const int64_t wo = (wd + 2 * spec.pad_w - kw) / spec.stride + 1;
  if (ho <= 0 || wo <= 0) fail("conv2d: kernel larger than padded input");
  if (b.defined() && (b.rank() != 1 || b.extent(0) != co))
    fail("conv2d: bias shape " + shape_str(b.shape()) + " does not match out channels");
  const bool rg =
      x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad());
  Tensor out = Tensor::zeros({n, co, ho, wo}, rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  auto wv = w.data();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t oc = 0; oc < co; ++oc) {
      const double bias = b.defined() ? b.data()[oc] : 0.0;
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox) {
          double acc = bias;
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t iy =
                resolve_pad(oy * spec.stride - spec.pad_h + ky, h, spec.mode_h);
            if (iy < 0) continue;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ix =
                  resolve_pad(ox * spec.stride - spec.pad_w + kx, wd, spec.mode_w);
              if (ix < 0) continue;
              for (int64_t ic = 0; ic < ci; ++ic)
                acc += xv[((in * ci + ic) * h + iy) * wd + ix] *
                       wv[((oc * ci + ic) * kh + ky) * kw + kx];
            }
          }
          ov[((in * co + oc) * ho + oy) * wo + ox] = acc;
        }
    }
  if (rg) record(std::make_unique<Conv2dNode>(x, w, b, out, spec));
  return out;
}

namespace {
Tensor unary_forward(Graph& g, int which, const Tensor& x, double floor = 0.0) {
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(x.shape(), rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  const int64_t n = x.numel();
  switch (which) {
    case 0:
      for (int64_t i = 0; i < n; ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      break;
    case 1:
      for (int64_t i = 0; i < n; ++i) {
        const double a = std::abs(xv[i]);
        ov[i] = std::max(xv[i], 0.0) + std::log1p(std::exp(-a));
      }
      break;
    case 2:
      for (int64_t i = 0; i < n; ++i)
        ov[i] = xv[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-xv[i]))
                             : std::exp(xv[i]) / (1.0 + std::exp(xv[i]));
      break;
    case 3:
      for (int64_t i = 0; i < n; ++i) ov[i] = std::exp(xv[i]);
      break;
    case 4:
      for (int64_t i = 0; i < n; ++i) ov[i] = std::log(xv[i] + floor);
      break;
  }
  if (rg) g.record(std::make_unique<UnaryNode>(which, x, out, floor));
  return out;
}
}  // namespace

Tensor Graph::relu(const Tensor& x) { return unary_forward(*this, 0, x); }
Tensor Graph::softplus(const Tensor& x) { return unary_forward(*this, 1, x); }
Tensor Graph::sigmoid(const Tensor& x) { return unary_forward(*this, 2, x); }
Tensor Graph::exp(const Tensor& x) { return unary_forward(*this, 3, x); }

Tensor Graph::log(const Tensor& x, double floor) {
  if (floor <= 0.0) fail("log: floor must be positive");
  return unary_forward(*this, 4, x, floor);
}

Tensor Graph::softmax(const Tensor& x, int axis) {
  axis = normalize_axis("softmax", axis, x.rank());
  if (x.extent(axis) == 0) fail("softmax: empty axis " + std::to_string(axis));
  const auto split = split_axis(x.shape(), axis);
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(x.shape(), rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (int64_t o = 0; o < split.outer; ++o)
    for (int64_t in = 0; in < split.inner; ++in) {
      const int64_t base = o * split.n * split.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < split.n; ++j)
        m = std::max(m, xv[base + j * split.inner]);
      double s = 0.0;
      for (int64_t j = 0; j < split.n; ++j) {
        const double e = std::exp(xv[base + j * split.inner] - m);
        ov[base + j * split.inner] = e;
        s += e;
      }
      const double inv = 1.0 / s;
      for (int64_t j = 0; j < split.n; ++j) ov[base + j * split.inner] *= inv;
    }
  if (rg) record(std::make_unique<SoftmaxNode>(x, out, split));
  return out;
}

namespace {
Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i)
    if (i != axis) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);
  return out;
}
}  // namespace

Tensor Graph::max_reduce(const Tensor& x, int axis) {
  axis = normalize_axis("max_reduce", axis, x.rank());
  if (x.extent(axis) == 0) fail("max_reduce: empty axis");
  const auto split = split_axis(x.shape(), axis);
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(drop_axis(x.shape(), axis), rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  std::vector<int64_t> argmax(static_cast<size_t>(split.outer * split.inner), 0);
  for (int64_t o = 0; o < split.outer; ++o)
    for (int64_t in = 0; in < split.inner; ++in) {
      const int64_t base = o * split.n * split.inner + in;
      double best = xv[base];
      int64_t bj = 0;
      for (int64_t j = 1; j < split.n; ++j) {
        const double v = xv[base + j * split.inner];
        if (v > best) {  // strict: ties keep the lowest index
          best = v;
          bj = j;
        }
      }
      ov[o * split.inner + in] = best;
      argmax[o * split.inner + in] = bj;
    }
  if (rg) record(std::make_unique<MaxReduceNode>(x, out, split, std::move(argmax)));
  return out;
}

Tensor Graph::mean_reduce(const Tensor& x, int axis) {
  axis = normalize_axis("mean_reduce", axis, x.rank());
  if (x.extent(axis) == 0) fail("mean_reduce: empty axis");
  const auto split = split_axis(x.shape(), axis);
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(drop_axis(x.shape(), axis), rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  const double inv = 1.0 / static_cast<double>(split.n);
  for (int64_t o = 0; o < split.outer; ++o)
    for (int64_t in = 0; in < split.inner; ++in) {
      const int64_t base = o * split.n * split.inner + in;
      double s = 0.0;
      for (int64_t j = 0; j < split.n; ++j) s += xv[base + j * split.inner];
      ov[o * split.inner + in] = s * inv;
    }
  if (rg) record(std::make_unique<MeanReduceNode>(x, out, split));
  return out;
}

Tensor Graph::mean_all(const Tensor& x) {
  if (x.numel() == 0) fail("mean_all: empty tensor");
  Tensor flat = reshape(x, {x.numel()});
  return mean_reduce(flat, 0);
}

Tensor Graph::concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) fail("concat: no inputs");
  const int rank = parts[0].rank();
  axis = normalize_axis("concat", axis, rank);
  Shape out_shape = parts[0].shape();
  int64_t total = parts[0].extent(axis);
  bool rg = parts[0].requires_grad();
  for (size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].rank() != rank)
      fail("concat: rank mismatch " + shape_str(parts[0].shape()) + " vs " +
           shape_str(parts[i].shape()));
    for (int a = 0; a < rank; ++a)
      if (a != axis && parts[i].extent(a) != out_shape[a])
        fail("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
             shape_str(parts[i].shape()));
    total += parts[i].extent(axis);
    rg = rg || parts[i].requires_grad();
  }
  out_shape[axis] = total;
  Tensor out = Tensor::zeros(out_shape, rg);
  auto ov = out.mutable_data();
  const auto so = split_axis(out_shape, axis);
  int64_t offset = 0;
  for (const auto& p : parts) {
    const auto sp = split_axis(p.shape(), axis);
    auto pv = p.data();
    for (int64_t o = 0; o < sp.outer; ++o)
      for (int64_t j = 0; j < sp.n; ++j)
        for (int64_t in = 0; in < sp.inner; ++in)
          ov[(o * so.n + offset + j) * sp.inner + in] =
              pv[(o * sp.n + j) * sp.inner + in];
    offset += sp.n;
  }
  if (rg)
    record(std::make_unique<ConcatNode>(
        std::vector<Tensor>(parts.begin(), parts.end()), out, axis));
  return out;
}

Tensor Graph::slice(const Tensor& x, const std::vector<int64_t>& start,
                    const std::vector<int64_t>& size) {
  const int rank = x.rank();
  if (static_cast<int>(start.size()) != rank || static_cast<int>(size.size()) != rank)
    fail("slice: start/size rank mismatch for shape " + shape_str(x.shape()));
  for (int a = 0; a < rank; ++a)
    if (start[a] < 0 || size[a] < 0 || start[a] + size[a] > x.extent(a))
      fail("slice: window out of bounds for shape " + shape_str(x.shape()));
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(Shape(size.begin(), size.end()), rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  const auto in_strides = row_major_strides(x.shape());
  std::vector<int64_t> idx(rank, 0);
  for (int64_t flat = 0; flat < out.numel(); ++flat) {
    int64_t src = 0;
    for (int a = 0; a < rank; ++a) src += (start[a] + idx[a]) * in_strides[a];
    ov[flat] = xv[src];
    for (int a = rank - 1; a >= 0; --a) {
      if (++idx[a] < size[a]) break;
      idx[a] = 0;
    }
  }
  if (rg) record(std::make_unique<SliceNode>(x, out, start));
  return out;
}

Tensor Graph::reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    fail("reshape: cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  const bool rg = x.requires_grad();
  Tensor out = Tensor::from_data(std::move(shape),
                                 std::vector<double>(x.data().begin(), x.data().end()),
                                 rg);
  if (rg) record(std::make_unique<ReshapeNode>(x, out));
  return out;
}

Tensor Graph::transpose(const Tensor& x, const std::vector<int>& perm) {
  const int rank = x.rank();
  if (static_cast<int>(perm.size()) != rank) fail("transpose: perm rank mismatch");
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (int a = 0; a < rank; ++a) {
    if (perm[a] < 0 || perm[a] >= rank || seen[perm[a]])
      fail("transpose: invalid permutation");
    seen[perm[a]] = true;
    out_shape[a] = x.extent(perm[a]);
  }
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(out_shape, rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  const auto in_strides = row_major_strides(x.shape());
  std::vector<int64_t> idx(rank, 0);
  for (int64_t flat = 0; flat < out.numel(); ++flat) {
    int64_t src = 0;
    for (int a = 0; a < rank; ++a) src += idx[a] * in_strides[perm[a]];
    ov[flat] = xv[src];
    for (int a = rank - 1; a >= 0; --a) {
      if (++idx[a] < out_shape[a]) break;
      idx[a] = 0;
    }
  }
  if (rg) record(std::make_unique<TransposeNode>(x, out, perm));
  return out;
}

Tensor Graph::gather(const Tensor& x, int axis, std::vector<int64_t> indices) {
  axis = normalize_axis("gather", axis, x.rank());
  const auto sx = split_axis(x.shape(), axis);
  for (int64_t i : indices)
    if (i < 0 || i >= sx.n)
      fail("gather: index " + std::to_string(i) + " out of range for axis extent " +
           std::to_string(sx.n));
  Shape out_shape = x.shape();
  out_shape[axis] = static_cast<int64_t>(indices.size());
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(out_shape, rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  const int64_t m = static_cast<int64_t>(indices.size());
  for (int64_t o = 0; o < sx.outer; ++o)
    for (int64_t j = 0; j < m; ++j)
      for (int64_t in = 0; in < sx.inner; ++in)
        ov[(o * m + j) * sx.inner + in] = xv[(o * sx.n + indices[j]) * sx.inner + in];
  if (rg) record(std::make_unique<GatherNode>(x, out, axis, std::move(indices)));
  return out;
}

Tensor Graph::broadcast(const Tensor& x, const Shape& target) {
  const int out_rank = static_cast<int>(target.size());
  const int in_rank = x.rank();
  if (in_rank > out_rank)
    fail("broadcast: source rank exceeds target " + shape_str(x.shape()) + " vs " +
         shape_str(target));
  Shape padded(out_rank, 1);
  for (int a = 0; a < in_rank; ++a) padded[out_rank - in_rank + a] = x.extent(a);
  for (int a = 0; a < out_rank; ++a)
    if (padded[a] != 1 && padded[a] != target[a])
      fail("broadcast: cannot expand " + shape_str(x.shape()) + " to " +
           shape_str(target));
  const bool rg = x.requires_grad();
  Tensor out = Tensor::zeros(target, rg);
  auto ov = out.mutable_data();
  auto xv = x.data();
  const auto src_strides = row_major_strides(padded);
  std::vector<int64_t> idx(out_rank, 0);
  for (int64_t flat = 0; flat < out.numel(); ++flat) {
    int64_t src = 0;
    for (int a = 0; a < out_rank; ++a)
      if (padded[a] != 1) src += idx[a] * src_strides[a];
    ov[flat] = xv[src];
    for (int a = out_rank - 1; a >= 0; --a) {
      if (++idx[a] < target[a]) break;
      idx[a] = 0;
    }
  }
  if (rg) record(std::make_unique<BroadcastNode>(x, out, padded));
  return out;
}

namespace {
// Corner indices and weights for one axis under the given boundary mode.
inline void axis_corners(double coord, int64_t extent, BoundaryMode mode,
                         int64_t& i0, int64_t& i1, double& frac) {
  if (mode == BoundaryMode::kClamp) {
    coord = std::clamp(coord, 0.0, static_cast<double>(extent - 1));
    i0 = static_cast<int64_t>(std::floor(coord));
    i0 = std::min(i0, extent - 1);
    i1 = std::min(i0 + 1, extent - 1);
    frac = coord - static_cast<double>(i0);
  } else {
    const double e = static_cast<double>(extent);
    double w = coord - e * std::floor(coord / e);
    if (w >= e) w -= e;  // guard against rounding at the seam
    i0 = static_cast<int64_t>(std::floor(w));
    i0 = std::min(i0, extent - 1);
    i1 = (i0 + 1) % extent;
    frac = w - static_cast<double>(i0);
  }
}
}  // namespace

Tensor Graph::bilinear_sample_2d(const Tensor& plane, const Tensor& queries,
                                 BoundaryMode rows, BoundaryMode cols) {
  if (plane.rank() != 3)
    fail("bilinear_sample_2d: plane must be HxWxC, got " + shape_str(plane.shape()));
  if (queries.rank() != 2 || queries.extent(1) != 2)
    fail("bilinear_sample_2d: queries must be Qx2, got " + shape_str(queries.shape()));
  const int64_t h = plane.extent(0), w = plane.extent(1), c = plane.extent(2);
  const int64_t q = queries.extent(0);
  const bool rg = plane.requires_grad();
  Tensor out = Tensor::zeros({q, c}, rg);
  auto ov = out.mutable_data();
  auto pv = plane.data();
  auto qv = queries.data();
  std::vector<BilinearCorner> corners(static_cast<size_t>(q));
  for (int64_t i = 0; i < q; ++i) {
    int64_t r0, r1, c0, c1;
    double fr, fc;
    axis_corners(qv[i * 2 + 0], h, rows, r0, r1, fr);
    axis_corners(qv[i * 2 + 1], w, cols, c0, c1, fc);
    BilinearCorner K;
    K.off[0] = r0 * w + c0;
    K.off[1] = r0 * w + c1;
    K.off[2] = r1 * w + c0;
    K.off[3] = r1 * w + c1;
    K.w[0] = (1.0 - fr) * (1.0 - fc);
    K.w[1] = (1.0 - fr) * fc;
    K.w[2] = fr * (1.0 - fc);
    K.w[3] = fr * fc;
    corners[static_cast<size_t>(i)] = K;
    for (int64_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += K.w[k] * pv[K.off[k] * c + ch];
      ov[i * c + ch] = acc;
    }
  }
  if (rg) record(std::make_unique<BilinearNode>(plane, out, std::move(corners), c));
  return out;
}

// ---- gradcheck ------------------------------------------------------------------

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  for (const auto& e : entries)
    os << (e.pass ? "ok   " : "FAIL ") << e.label << " max_rel_err=" << e.max_rel_err
       << "\n";
  os << (pass ? "gradcheck passed" : "gradcheck FAILED") << " (tol=" << tol << ")";
  return os.str();
}

GradcheckReport gradcheck(Graph& g, const GradFn& fn, std::vector<Tensor> inputs,
                          std::vector<std::string> labels, double step, double tol) {
  GradcheckReport report;
  report.tol = tol;
  for (auto& t : inputs) t.set_requires_grad(true);

  // analytic pass
  g.reset();
  for (auto& t : inputs) t.zero_grad();
  Tensor y = fn(g, inputs);
  if (y.numel() != 1)
    throw std::invalid_argument("gradcheck: fn must return a scalar, got shape " +
                                shape_str(y.shape()));
  g.backward(y);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) {
    auto gr = t.grad();
    analytic.emplace_back(gr.begin(), gr.end());
  }

  auto eval = [&]() {
    g.reset();
    return fn(g, inputs).item();
  };

  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    auto raw = t.mutable_data();
    GradcheckEntry entry;
    entry.label = ti < labels.size() ? labels[ti] : "input " + std::to_string(ti);
    for (size_t i = 0; i < raw.size(); ++i) {
      const double keep = raw[i];
      raw[i] = keep + step;
      const double up = eval();
      raw[i] = keep - step;
      const double down = eval();
      raw[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[ti][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err < tol;
    report.entries.push_back(entry);
    report.pass = report.pass && entry.pass;
  }
  g.reset();
  return report;
}

}  // namespace cylocc
