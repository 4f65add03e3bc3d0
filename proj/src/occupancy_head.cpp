#include "cylocc/occupancy_head.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cylocc {

CartGridSpec scaled_cart_grid(const CartGridSpec& cart, int level) {
  if (level < 0) throw std::invalid_argument("scaled_cart_grid: negative level");
  const int f = 1 << level;
  if (cart.nx % f != 0 || cart.ny % f != 0 || cart.nz % f != 0)
    throw std::invalid_argument("scaled_cart_grid: grid " + std::to_string(cart.nx) +
                                "x" + std::to_string(cart.ny) + "x" +
                                std::to_string(cart.nz) +
                                " not divisible by 2^" + std::to_string(level));
  CartGridSpec out = cart;
  out.nx /= f;
  out.ny /= f;
  out.nz /= f;
  return out;
}

Tensor sample_tpv_features(Graph& g, const TpvPlanes& planes,
                           const CartGridSpec& cart, const CylGridSpec& cyl) {
  cart.validate();
  cyl.validate();
  const int64_t q = static_cast<int64_t>(cart.nx) * cart.ny * cart.nz;
  Tensor q_rd = Tensor::zeros({q, 2});
  Tensor q_dz = Tensor::zeros({q, 2});
  Tensor q_zr = Tensor::zeros({q, 2});
  auto rd = q_rd.mutable_data();
  auto dz = q_dz.mutable_data();
  auto zr = q_zr.mutable_data();

  const double r_bins = static_cast<double>(planes.f_rd.extent(0));
  const double a_bins = static_cast<double>(planes.f_rd.extent(1));
  const double z_bins = static_cast<double>(planes.f_dz.extent(1));
  if (planes.f_dz.extent(0) != planes.f_rd.extent(1) ||
      planes.f_zr.extent(0) != planes.f_dz.extent(1) ||
      planes.f_zr.extent(1) != planes.f_rd.extent(0))
    throw std::invalid_argument("sample_tpv_features: inconsistent plane extents");

  int64_t i = 0;
  for (int ix = 0; ix < cart.nx; ++ix)
    for (int iy = 0; iy < cart.ny; ++iy)
      for (int iz = 0; iz < cart.nz; ++iz, ++i) {
        const Vec3 c = cart_to_cyl(cart.voxel_center(ix, iy, iz));
        const double ur =
            (c.x - cyl.r_min) / (cyl.r_max - cyl.r_min) * r_bins - 0.5;
        const double ua =
            (c.y + std::numbers::pi) / (2.0 * std::numbers::pi) * a_bins - 0.5;
        const double uz =
            (c.z - cyl.z_min) / (cyl.z_max - cyl.z_min) * z_bins - 0.5;
        rd[2 * i] = ur;
        rd[2 * i + 1] = ua;
        dz[2 * i] = ua;
        dz[2 * i + 1] = uz;
        zr[2 * i] = uz;
        zr[2 * i + 1] = ur;
      }

  Tensor s_rd = g.bilinear_sample_2d(planes.f_rd, q_rd, BoundaryMode::kClamp,
                                     BoundaryMode::kWrap);
  Tensor s_dz = g.bilinear_sample_2d(planes.f_dz, q_dz, BoundaryMode::kWrap,
                                     BoundaryMode::kClamp);
  Tensor s_zr = g.bilinear_sample_2d(planes.f_zr, q_zr, BoundaryMode::kClamp,
                                     BoundaryMode::kClamp);
  Tensor sum = g.add(g.add(s_rd, s_dz), s_zr);
  return g.reshape(sum, {cart.nx, cart.ny, cart.nz, planes.f_rd.extent(2)});
}

OccupancyHead::OccupancyHead(Graph& g, const std::string& prefix, int channels,
                             int classes, Rng& rng)
    : classes_(classes) {
  if (channels <= 0 || classes < 1)
    throw std::invalid_argument("occupancy head: need positive channels and >= 1 class");
  const int64_t c = channels;
  h_w_ = add_param(g, prefix + ".h.w", {c, c}, c, rng);
  h_b_ = add_param(g, prefix + ".h.b", {c}, 0, rng);
  out_w_ = add_param(g, prefix + ".out.w", {c, classes + 1}, c, rng, 0.01);
  out_b_ = add_param(g, prefix + ".out.b", {classes + 1}, 0, rng);
}

Tensor OccupancyHead::classify(Graph& g, const Tensor& voxel_features) const {
  if (voxel_features.rank() != 4)
    throw std::invalid_argument("classify: expected X x Y x Z x C");
  Tensor h = g.relu(dense(g, voxel_features, h_w_, h_b_));
  return dense(g, h, out_w_, out_b_);
}

std::vector<Tensor> OccupancyHead::run(Graph& g, const MultiScalePlanes& planes,
                                       const CartGridSpec& cart,
                                       const CylGridSpec& cyl) const {
  std::vector<Tensor> logits;
  logits.reserve(PlaneEncoderDecoder::kScales);
  for (int l = 0; l < PlaneEncoderDecoder::kScales; ++l) {
    const CartGridSpec grid_l = scaled_cart_grid(cart, l);
    Tensor feats = sample_tpv_features(g, planes.scales[static_cast<size_t>(l)],
                                       grid_l, cyl);
    logits.push_back(classify(g, feats));
  }
  return logits;
}

OccGrid decode_occupancy(const Tensor& logits, int classes) {
  if (logits.rank() != 4 || logits.extent(3) != classes + 1)
    throw std::invalid_argument("decode_occupancy: logits shape mismatch");
  OccGrid grid;
  grid.nx = static_cast<int>(logits.extent(0));
  grid.ny = static_cast<int>(logits.extent(1));
  grid.nz = static_cast<int>(logits.extent(2));
  grid.class_count = static_cast<uint8_t>(classes);
  grid.labels.resize(static_cast<size_t>(logits.numel() / (classes + 1)));
  auto v = logits.data();
  const int64_t width = classes + 1;
  for (size_t i = 0; i < grid.labels.size(); ++i) {
    int best = 0;
    double best_v = v[static_cast<int64_t>(i) * width];
    for (int c = 1; c < static_cast<int>(width); ++c) {
      const double x = v[static_cast<int64_t>(i) * width + c];
      if (x > best_v) {
        best_v = x;
        best = c;
      }
    }
    grid.labels[i] = static_cast<uint8_t>(best);
  }
  return grid;
}

}  // namespace cylocc
