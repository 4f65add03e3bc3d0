#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cylocc/checkpoint.hpp"
#include "cylocc/rng.hpp"
#include "cylocc/tensor.hpp"

using namespace cylocc;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Reduces any op output to a scalar with a fixed random weighting so the
// incoming gradient is non-uniform.
Tensor weighted_sum(Graph& g, const Tensor& t, Rng& rng) {
  Tensor w = random_tensor(rng, t.shape(), 0.1, 1.0);
  return g.sum_all(g.mul(t, w));
}

// Node with a deliberately wrong backward (forward is y = 2x, backward claims 3).
struct WrongScaleNode : Node {
  WrongScaleNode(Tensor x, Tensor out)
      : Node("wrong_scale"), x_(std::move(x)), out_(std::move(out)) {}
  void backward() override {
    if (!x_.requires_grad()) return;
    auto g = out_.grad();
    auto gx = x_.grad_mutable();
    for (int64_t i = 0; i < out_.numel(); ++i) gx[i] += 3.0 * g[i];
  }
  Tensor x_, out_;
};

Tensor wrong_scale(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) ov[i] = 2.0 * xv[i];
  if (x.requires_grad()) g.record(std::make_unique<WrongScaleNode>(x, out));
  return out;
}

}  // namespace

TEST_CASE("softmax of zeros is uniform") {
  Graph g;
  Tensor x = Tensor::zeros({3});
  Tensor p = g.softmax(x, 0);
  for (int i = 0; i < 3; ++i) CHECK(p.data()[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax sums to one along its axis") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Tensor x = random_tensor(rng, {4, 5, 3}, -30.0, 30.0);
    const int axis = static_cast<int>(rng.uniform_int(0, 2));
    Tensor p = g.softmax(x, axis);
    const auto split_extent = p.extent(axis);
    // walk all lanes along the axis
    const auto& shape = p.shape();
    std::vector<int64_t> strides = row_major_strides(shape);
    int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= shape[a];
    for (size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) {
        double s = 0.0;
        for (int64_t j = 0; j < split_extent; ++j)
          s += p.data()[(o * split_extent + j) * inner + in];
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
  }
}

TEST_CASE("softmax over empty axis is an error") {
  Graph g;
  Tensor x = Tensor::zeros({2, 0});
  CHECK_THROWS_AS(g.softmax(x, 1), std::invalid_argument);
}

TEST_CASE("matmul identity-row selection") {
  Graph g;
  Tensor a = Tensor::from_data({2, 3}, {1, 0, 0, 0, 1, 0});
  Tensor b = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor c = g.matmul(a, b);
  const std::vector<double> want = {1, 2, 3, 4};
  for (int i = 0; i < 4; ++i) CHECK(c.data()[i] == want[i]);
}

TEST_CASE("shape mismatch errors name the op and shapes") {
  Graph g;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  try {
    g.add(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[3,2]") != std::string::npos);
  }
}

TEST_CASE("conv2d output shape") {
  Graph g;
  Tensor x = Tensor::zeros({1, 4, 8, 8});
  Tensor w = Tensor::zeros({3, 4, 3, 3});
  Conv2dSpec spec;
  spec.pad_h = spec.pad_w = 1;
  Tensor y = g.conv2d(x, w, Tensor(), spec);
  CHECK(y.shape() == Shape{1, 3, 8, 8});
}

TEST_CASE("conv2d one-hot center kernel is the identity") {
  Rng rng(11);
  Graph g;
  Tensor x = random_tensor(rng, {1, 1, 5, 7});
  Tensor w = Tensor::zeros({1, 1, 3, 3});
  w.mutable_data()[4] = 1.0;
  Conv2dSpec spec;
  spec.pad_h = spec.pad_w = 1;
  Tensor y = g.conv2d(x, w, Tensor(), spec);
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d circular padding wraps the chosen axis") {
  Graph g;
  // 1x1x2x4 input; kernel picks the left neighbor; circular on width only
  Tensor x = Tensor::from_data({1, 1, 2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
  Tensor w = Tensor::zeros({1, 1, 1, 3});
  w.mutable_data()[0] = 1.0;  // weight on column offset -1
  Conv2dSpec spec;
  spec.pad_w = 1;
  spec.mode_w = PadMode::kCircular;
  Tensor y = g.conv2d(x, w, Tensor(), spec);
  REQUIRE(y.shape() == Shape{1, 1, 2, 4});
  const std::vector<double> want = {3, 0, 1, 2, 7, 4, 5, 6};
  for (int i = 0; i < 8; ++i) CHECK(y.data()[i] == want[i]);
}

TEST_CASE("grad of sum of squares") {
  Graph g;
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
  Tensor loss = g.sum_all(g.mul(x, x));
  g.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(x.grad()[2] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy gradient is p minus onehot") {
  Graph g;
  Tensor logits = Tensor::from_data({2}, {0, 0}, true);
  Tensor p = g.softmax(logits, 0);
  Tensor logp = g.log(p);
  Tensor picked = g.gather(logp, 0, {0});  // target class 0
  Tensor loss = g.scalar_mul(g.mean_all(picked), -1.0);
  g.backward(loss);
  CHECK(logits.grad()[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(logits.grad()[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward on non-scalar is an error") {
  Graph g;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = g.mul(x, x);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("backward twice without reset is an error") {
  Graph g;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor loss = g.sum_all(g.mul(x, x));
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), std::logic_error);
  g.reset();  // after reset a fresh graph works again
  Tensor loss2 = g.sum_all(g.mul(x, x));
  g.backward(loss2);
}

TEST_CASE("max-reduce tie routes gradient to the lowest index only") {
  Graph g;
  Tensor x = Tensor::from_data({4}, {1.0, 3.0, 3.0, 2.0}, true);
  Tensor m = g.max_reduce(x, 0);
  CHECK(m.item() == 3.0);
  Tensor loss = g.scalar_mul(g.mean_all(m), 5.0);
  g.backward(loss);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 5.0);
  CHECK(x.grad()[2] == 0.0);
  CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("max-reduce routed gradient sums to the incoming gradient") {
  Rng rng(23);
  Graph g;
  Tensor x = random_tensor(rng, {3, 6});
  x.set_requires_grad(true);
  Tensor m = g.max_reduce(x, 1);
  Tensor w = random_tensor(rng, {3}, 0.5, 2.0);
  Tensor loss = g.sum_all(g.mul(m, w));
  g.backward(loss);
  double got = 0.0;
  for (double v : x.grad()) got += v;
  double want = 0.0;
  for (double v : w.data()) want += v;
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("forward is bit-identical across runs") {
  auto run = [] {
    Rng rng(99);
    Graph g;
    Tensor x = random_tensor(rng, {2, 3, 4, 4});
    Tensor w = random_tensor(rng, {3, 3, 3, 3});
    Conv2dSpec spec;
    spec.pad_h = spec.pad_w = 1;
    Tensor y = g.relu(g.conv2d(x, w, Tensor(), spec));
    Tensor s = g.softmax(g.reshape(y, {2, 48}), 1);
    return std::vector<double>(s.data().begin(), s.data().end());
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("gradcheck passes on a constant function") {
  Graph g;
  auto fn = [](Graph&, const std::vector<Tensor>&) { return Tensor::scalar(4.2); };
  auto report = gradcheck(g, fn, {Tensor::from_data({3}, {1, 2, 3})});
  CHECK(report.pass);
}

TEST_CASE("gradcheck fails the wrong-backward negative control") {
  Graph g;
  auto fn = [](Graph& gg, const std::vector<Tensor>& in) {
    return gg.mean_all(wrong_scale(gg, in[0]));
  };
  auto report = gradcheck(g, fn, {Tensor::from_data({3}, {1, 2, 3})});
  CHECK_FALSE(report.pass);
}

TEST_CASE("gradcheck rejects non-scalar functions") {
  Graph g;
  auto fn = [](Graph& gg, const std::vector<Tensor>& in) {
    return gg.mul(in[0], in[0]);
  };
  CHECK_THROWS_AS(gradcheck(g, fn, {Tensor::from_data({2}, {1, 2})}),
                  std::invalid_argument);
}

TEST_CASE("gradcheck passes for every op on randomized shapes, 10 seeds") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Graph g;

    auto check = [&](const char* label, const GradFn& fn, std::vector<Tensor> inputs) {
      auto report = gradcheck(g, fn, std::move(inputs));
      INFO(label << " seed " << seed << "\n" << report.summary());
      CHECK(report.pass);
    };

    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {3, 4});
    Rng wa = rng.fork(1), wb = rng.fork(2), wc = rng.fork(3);

    check("add", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.add(in[0], in[1]), r);
    }, {a, b});
    check("sub", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.sub(in[0], in[1]), r);
    }, {a, b});
    check("mul", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.mul(in[0], in[1]), r);
    }, {a, b});
    check("scalar_mul", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.scalar_mul(in[0], -1.7), r);
    }, {a});
    check("matmul", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      return weighted_sum(gg, gg.matmul(in[0], in[1]), r);
    }, {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})});
    check("linear", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      return weighted_sum(gg, gg.linear(in[0], in[1], in[2]), r);
    }, {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2}),
        random_tensor(rng, {2})});

    Conv2dSpec zero_pad;
    zero_pad.pad_h = zero_pad.pad_w = 1;
    check("conv2d zero pad", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wc;
      return weighted_sum(gg, gg.conv2d(in[0], in[1], in[2], zero_pad), r);
    }, {random_tensor(rng, {2, 2, 4, 5}), random_tensor(rng, {3, 2, 3, 3}),
        random_tensor(rng, {3})});

    Conv2dSpec circ;
    circ.stride = 2;
    circ.pad_h = circ.pad_w = 1;
    circ.mode_w = PadMode::kCircular;
    check("conv2d stride 2 circular w", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wc;
      return weighted_sum(gg, gg.conv2d(in[0], in[1], in[2], circ), r);
    }, {random_tensor(rng, {1, 2, 4, 4}), random_tensor(rng, {2, 2, 3, 3}),
        random_tensor(rng, {2})});

    // keep relu inputs away from the kink
    Tensor relu_in = random_tensor(rng, {3, 4});
    for (auto& v : relu_in.mutable_data())
      if (std::abs(v) < 0.05) v += 0.1;
    check("relu", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.relu(in[0]), r);
    }, {relu_in});
    check("softplus", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.softplus(in[0]), r);
    }, {a});
    check("sigmoid", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.sigmoid(in[0]), r);
    }, {a});
    check("softmax", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.softmax(in[0], 1), r);
    }, {a});
    check("log", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.log(in[0]), r);
    }, {random_tensor(rng, {3, 4}, 0.2, 3.0)});
    check("exp", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.exp(in[0]), r);
    }, {a});
    check("max_reduce", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      return weighted_sum(gg, gg.max_reduce(in[0], 1), r);
    }, {random_tensor(rng, {3, 5})});
    check("mean_reduce", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      return weighted_sum(gg, gg.mean_reduce(in[0], 0), r);
    }, {random_tensor(rng, {3, 5})});
    check("concat", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      std::vector<Tensor> parts = {in[0], in[1]};
      return weighted_sum(gg, gg.concat(parts, 1), r);
    }, {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 4})});
    check("slice", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wc;
      return weighted_sum(gg, gg.slice(in[0], {1, 0}, {2, 3}), r);
    }, {random_tensor(rng, {4, 5})});
    check("reshape", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wa;
      return weighted_sum(gg, gg.reshape(in[0], {4, 3}), r);
    }, {a});
    check("transpose", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wc;
      return weighted_sum(gg, gg.transpose(in[0], {2, 0, 1}), r);
    }, {random_tensor(rng, {2, 3, 4})});
    check("gather", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wc;
      return weighted_sum(gg, gg.gather(in[0], 0, {2, 0, 2}), r);
    }, {random_tensor(rng, {4, 3})});
    check("broadcast", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wc;
      return weighted_sum(gg, gg.broadcast(in[0], {4, 3, 2}), r);
    }, {random_tensor(rng, {3, 1})});

    Tensor plane = random_tensor(rng, {4, 6, 2});
    Tensor queries = Tensor::from_data(
        {3, 2}, {0.4, 1.3, 2.6, 5.7, 3.2, -0.8});  // last one exercises wrap/clamp
    check("bilinear clamp", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      return weighted_sum(gg, gg.bilinear_sample_2d(in[0], queries,
                                                    BoundaryMode::kClamp,
                                                    BoundaryMode::kClamp), r);
    }, {plane});
    check("bilinear wrap", [&](Graph& gg, const std::vector<Tensor>& in) {
      Rng r = wb;
      return weighted_sum(gg, gg.bilinear_sample_2d(in[0], queries,
                                                    BoundaryMode::kClamp,
                                                    BoundaryMode::kWrap), r);
    }, {plane});
  }
}

TEST_CASE("gradcheck passes on small composite graphs, 5 seeds") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 31);
    Graph g;
    Tensor x = random_tensor(rng, {4, 4});
    Tensor w = random_tensor(rng, {4, 4});
    auto fn = [](Graph& gg, const std::vector<Tensor>& in) {
      Tensor h = gg.sigmoid(gg.matmul(in[0], in[1]));
      Tensor p = gg.softmax(h, 1);
      Tensor lp = gg.log(p);
      return gg.scalar_mul(gg.mean_all(gg.mul(p, lp)), -1.0);
    };
    auto report = gradcheck(g, fn, {x, w}, {"x", "w"});
    INFO(report.summary());
    CHECK(report.pass);
  }
}

TEST_CASE("bilinear sampling wraps the column axis smoothly") {
  Graph g;
  // 1x4 plane (single row, one channel); wrap places -0.5 between cols 3 and 0
  Tensor plane = Tensor::from_data({1, 4, 1}, {10, 20, 30, 40});
  Tensor q = Tensor::from_data({2, 2}, {0.0, -0.5, 0.0, 3.5});
  Tensor out = g.bilinear_sample_2d(plane, q, BoundaryMode::kClamp, BoundaryMode::kWrap);
  CHECK(out.data()[0] == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(out.data()[1] == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("bilinear sampling clamps outside the grid") {
  Graph g;
  Tensor plane = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
  Tensor q = Tensor::from_data({2, 2}, {-3.0, 0.0, 5.0, 1.0});
  Tensor out = g.bilinear_sample_2d(plane, q, BoundaryMode::kClamp, BoundaryMode::kClamp);
  CHECK(out.data()[0] == 1.0);
  CHECK(out.data()[1] == 4.0);
}

TEST_CASE("parameters survive reset and keep registration order") {
  Graph g;
  g.add_parameter("b", Tensor::from_data({2}, {1, 2}));
  g.add_parameter("a", Tensor::from_data({1}, {3}));
  CHECK(g.parameter_names() == std::vector<std::string>{"b", "a"});
  Tensor p = g.parameter("b");
  Tensor loss = g.sum_all(g.mul(p, p));
  g.backward(loss);
  CHECK(p.grad()[0] == 2.0);
  g.reset();
  CHECK(p.grad()[0] == 0.0);
  CHECK(g.parameter("b").data()[0] == 1.0);
  CHECK_THROWS_AS(g.add_parameter("a", Tensor::scalar(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(g.parameter("missing"), std::invalid_argument);
}

TEST_CASE("weights file round-trips byte-identically") {
  Graph g;
  Rng rng(5);
  g.add_parameter("enc.w", random_tensor(rng, {3, 2, 3, 3}));
  g.add_parameter("enc.b", random_tensor(rng, {3}));
  g.add_parameter("head.w", random_tensor(rng, {4, 4}));
  const std::string p1 = "test_weights_a.ocwt";
  const std::string p2 = "test_weights_b.ocwt";
  save_weights(g, p1);

  Graph g2;
  g2.add_parameter("enc.w", Tensor::zeros({3, 2, 3, 3}));
  g2.add_parameter("enc.b", Tensor::zeros({3}));
  g2.add_parameter("head.w", Tensor::zeros({4, 4}));
  load_weights(g2, p1);
  save_weights(g2, p2);

  auto slurp = [](const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is),
                       std::istreambuf_iterator<char>());
  };
  const std::string b1 = slurp(p1), b2 = slurp(p2);
  CHECK(b1.size() > 0);
  CHECK(b1 == b2);
  for (double v : g2.parameter("head.w").data())
    CHECK(v == doctest::Approx(v));  // finite
  CHECK(g.parameter("enc.w").data()[5] == g2.parameter("enc.w").data()[5]);
}

TEST_CASE("weights loading rejects mismatched graphs") {
  Graph g;
  g.add_parameter("w", Tensor::from_data({2}, {1, 2}));
  save_weights(g, "test_weights_c.ocwt");
  Graph wrong_shape;
  wrong_shape.add_parameter("w", Tensor::zeros({3}));
  CHECK_THROWS_AS(load_weights(wrong_shape, "test_weights_c.ocwt"),
                  std::runtime_error);
  Graph wrong_name;
  wrong_name.add_parameter("v", Tensor::zeros({2}));
  CHECK_THROWS_AS(load_weights(wrong_name, "test_weights_c.ocwt"),
                  std::runtime_error);
}

TEST_CASE("alloc stats track live tensor storage") {
  const int64_t before = AllocStats::current();
  {
    Tensor t = Tensor::zeros({10, 10});
    CHECK(AllocStats::current() == before + 100);
    Tensor copy = t;  // shares storage
    CHECK(AllocStats::current() == before + 100);
    t.set_requires_grad(true);
    CHECK(AllocStats::current() == before + 200);
  }
  CHECK(AllocStats::current() == before);
  AllocStats::reset_peak();
  CHECK(AllocStats::peak() == AllocStats::current());
}
