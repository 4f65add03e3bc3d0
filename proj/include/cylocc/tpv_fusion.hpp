#pragma once

#include <string>

#include "cylocc/nn.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// Tri-perspective polar planes. Layouts (rows x cols x channels):
///   f_rd: R x A, f_dz: A x Z, f_zr: Z x R.
struct TpvPlanes {
  Tensor f_rd, f_dz, f_zr;
};

/// Per-plane pre-MLP group maxes, M*C channels ordered group-major
/// (channel = group * C + c). Same plane layouts as TpvPlanes.
struct GroupMaxes {
  Tensor f_rd, f_dz, f_zr;
};

/// Splits the pooled axis into M contiguous groups, max-reduces each, and
/// mixes the stacked group features back to C channels with one dense layer
/// per plane. M = 1 is plain max pooling followed by the dense mix.
class SpatialGroupPool {
 public:
  SpatialGroupPool(Graph& g, const std::string& prefix, int groups, int channels,
                   Rng& rng);

  int groups() const { return groups_; }

  /// volume: R x A x Z x C. Throws if the pooled axis of any plane is not
  /// divisible by M (names the axis).
  GroupMaxes group_maxes(Graph& g, const Tensor& volume) const;
  TpvPlanes apply(Graph& g, const Tensor& volume) const;

 private:
  int groups_;
  int channels_;
  Tensor rd_w_, rd_b_, dz_w_, dz_b_, zr_w_, zr_b_;
};

/// Per-position sigmoid gate over concatenated camera and LiDAR features:
/// fused = gate * cam + (1 - gate) * lidar, separate gate weights per plane.
class DynamicFusion {
 public:
  DynamicFusion(Graph& g, const std::string& prefix, int channels, Rng& rng);

  TpvPlanes fuse(Graph& g, const TpvPlanes& cam, const TpvPlanes& lidar) const;

 private:
  int channels_;
  Tensor rd_w_, rd_b_, dz_w_, dz_b_, zr_w_, zr_b_;
};

}  // namespace cylocc
