#pragma once

#include <string>
#include <vector>

#include "cylocc/encoder_decoder.hpp"
#include "cylocc/formats.hpp"
#include "cylocc/geometry.hpp"
#include "cylocc/nn.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// The Cartesian grid at 2^-l resolution (extents must divide evenly).
CartGridSpec scaled_cart_grid(const CartGridSpec& cart, int level);

/// Samples the three polar planes at the cylindrical coordinates of every
/// voxel center of `cart` and sums them: X x Y x Z x C. Azimuth coordinates
/// wrap, radius and height clamp. Plane bin centers sit at integer
/// coordinates; the query for value v on an axis with `extent` bins covering
/// [lo, hi) is (v - lo) / (hi - lo) * extent - 0.5.
Tensor sample_tpv_features(Graph& g, const TpvPlanes& planes,
                           const CartGridSpec& cart, const CylGridSpec& cyl);

/// Per-voxel classifier shared across scales: C -> C -> classes + 1 logits.
class OccupancyHead {
 public:
  OccupancyHead(Graph& g, const std::string& prefix, int channels, int classes,
                Rng& rng);

  int classes() const { return classes_; }

  /// X x Y x Z x C -> X x Y x Z x (classes + 1) logits.
  Tensor classify(Graph& g, const Tensor& voxel_features) const;

  /// Full head over every scale; logits[l] matches scaled_cart_grid(cart, l).
  std::vector<Tensor> run(Graph& g, const MultiScalePlanes& planes,
                          const CartGridSpec& cart, const CylGridSpec& cyl) const;

 private:
  int classes_;
  Tensor h_w_, h_b_, out_w_, out_b_;
};

/// Argmax decode of full-resolution logits (lowest class index wins ties).
OccGrid decode_occupancy(const Tensor& logits, int classes);

}  // namespace cylocc
