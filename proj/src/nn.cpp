#include "cylocc/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cylocc {

Tensor add_param(Graph& g, const std::string& name, const Shape& shape,
                 int64_t fan_in, Rng& rng, double gain) {
  Tensor t = Tensor::zeros(shape);
  if (fan_in > 0) {
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in));
    auto v = t.mutable_data();
    for (double& x : v) x = rng.uniform(-bound, bound);
  }
  return g.add_parameter(name, t);
}

Tensor dense(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1) throw std::invalid_argument("dense: scalar input");
  const int64_t in = x.extent(static_cast<int>(x.rank()) - 1);
  Tensor flat = g.reshape(x, {x.numel() / in, in});
  Tensor y = g.linear(flat, w, b);
  Shape out_shape = x.shape();
  out_shape.back() = w.extent(1);
  return g.reshape(y, out_shape);
}

Tensor plane_to_image(Graph& g, const Tensor& plane) {
  if (plane.rank() != 3)
    throw std::invalid_argument("plane_to_image: expected H x W x C");
  Tensor chw = g.transpose(plane, {2, 0, 1});
  return g.reshape(chw, {1, plane.extent(2), plane.extent(0), plane.extent(1)});
}

Tensor image_to_plane(Graph& g, const Tensor& img) {
  if (img.rank() != 4 || img.extent(0) != 1)
    throw std::invalid_argument("image_to_plane: expected 1 x C x H x W");
  Tensor chw = g.reshape(img, {img.extent(1), img.extent(2), img.extent(3)});
  return g.transpose(chw, {1, 2, 0});
}

Tensor upsample2(Graph& g, const Tensor& img) {
  if (img.rank() != 4)
    throw std::invalid_argument("upsample2: expected N x C x H x W");
  auto doubled = [](int64_t n) {
    std::vector<int64_t> idx(static_cast<size_t>(2 * n));
    for (int64_t i = 0; i < 2 * n; ++i) idx[static_cast<size_t>(i)] = i / 2;
    return idx;
  };
  Tensor rows = g.gather(img, 2, doubled(img.extent(2)));
  return g.gather(rows, 3, doubled(img.extent(3)));
}

}  // namespace cylocc
