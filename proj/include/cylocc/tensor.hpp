#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cylocc {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
std::vector<int64_t> row_major_strides(const Shape& shape);

/// Running count of live tensor storage (value + gradient doubles). Used by
/// memory assertions in tests; single-threaded like the rest of the library.
struct AllocStats {
  static int64_t current();
  static int64_t peak();
  static void reset_peak();
};

/// Dense row-major tensor of 64-bit floats. Copies share storage; values are
/// written once by the op that creates them. A gradient buffer of identical
/// shape exists iff requires_grad is set.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int64_t numel() const;
  int64_t extent(int axis) const;

  std::span<const double> data() const;
  std::span<double> mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool value);
  std::span<const double> grad() const;
  std::span<double> grad_mutable();
  void zero_grad();
  void accumulate_grad(std::span<const double> g);

  /// Value of a scalar (1-element) tensor.
  double item() const;
  double at(std::initializer_list<int64_t> idx) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

enum class PadMode { kZero, kCircular };
enum class BoundaryMode { kClamp, kWrap };

struct Conv2dSpec {
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  PadMode mode_h = PadMode::kZero;
  PadMode mode_w = PadMode::kZero;
};

/// One recorded operation. Subclasses hold whatever activations their
/// backward needs; the tape replays them in reverse append order.
class Node {
 public:
  explicit Node(std::string kind) : kind_(std::move(kind)) {}
  virtual ~Node() = default;
  virtual void backward() = 0;
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

/// Reverse-mode tape plus the named parameter registry. Ops append nodes in
/// execution order; backward walks them once, in reverse. Single-writer.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Parameters are leaf tensors that survive tape resets. Registration order
  // is the serialization order.
  Tensor add_parameter(const std::string& name, Tensor init);
  Tensor parameter(const std::string& name) const;
  bool has_parameter(const std::string& name) const;
  const std::vector<std::string>& parameter_names() const { return param_order_; }

  /// Clears the tape and the backward flag and zeroes parameter grads.
  /// Parameters themselves are kept.
  void reset();
  void backward(const Tensor& loss);
  size_t node_count() const { return nodes_.size(); }
  void record(std::unique_ptr<Node> node);

  // ---- op set ------------------------------------------------------------
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scalar_mul(const Tensor& a, double c);
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
  Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
                const Conv2dSpec& spec);
  Tensor relu(const Tensor& x);
  Tensor softplus(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor softmax(const Tensor& x, int axis);
  /// log(x + floor): the offset bounds the slope at 1/floor and keeps the
  /// gradient alive when probabilities saturate to zero.
  Tensor log(const Tensor& x, double floor = 1e-12);
  Tensor exp(const Tensor& x);
  Tensor max_reduce(const Tensor& x, int axis);
  Tensor mean_reduce(const Tensor& x, int axis);
  Tensor mean_all(const Tensor& x);
  Tensor concat(std::span<const Tensor> parts, int axis);
  Tensor slice(const Tensor& x, const std::vector<int64_t>& start,
               const std::vector<int64_t>& size);
  Tensor reshape(const Tensor& x, Shape shape);
  Tensor transpose(const Tensor& x, const std::vector<int>& perm);
  Tensor gather(const Tensor& x, int axis, std::vector<int64_t> indices);
  Tensor broadcast(const Tensor& x, const Shape& target);
  /// plane: H x W x C, queries: Q x 2 rows of (row_coord, col_coord) in bin
  /// units. Gradient flows to the plane only.
  Tensor bilinear_sample_2d(const Tensor& plane, const Tensor& queries,
                            BoundaryMode rows, BoundaryMode cols);

  // Composite helpers (no new node kinds).
  Tensor sum_all(const Tensor& x) {
    return scalar_mul(mean_all(x), static_cast<double>(x.numel()));
  }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::string> param_order_;
  std::vector<Tensor> param_tensors_;
  bool backward_done_ = false;
};

// ---- gradient checking ----------------------------------------------------

struct GradcheckEntry {
  std::string label;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tol = 1e-4;
  bool pass = true;
  std::string summary() const;
};

using GradFn = std::function<Tensor(Graph&, const std::vector<Tensor>&)>;

/// Central finite differences against the tape gradients. fn must return a
/// scalar. rel err per element is |a-n| / max(|a|,|n|,1e-8); an input passes
/// iff its max rel err is below tol.
GradcheckReport gradcheck(Graph& g, const GradFn& fn, std::vector<Tensor> inputs,
                          std::vector<std::string> labels = {},
                          double step = 1e-5, double tol = 1e-4);

}  // namespace cylocc
