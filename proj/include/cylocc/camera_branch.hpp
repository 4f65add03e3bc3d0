#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cylocc/formats.hpp"
#include "cylocc/geometry.hpp"
#include "cylocc/nn.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// 2D image branch: small conv backbone, per-pixel depth distribution over K
/// bins, context features, and lifting into a pseudo point cloud whose
/// feature of the point at bin k is V_depth[k] * V_context.
class CameraBranch {
 public:
  /// Registers parameters under `prefix.` in the graph. The backbone maps
  /// 3 channels to `channels` at 1/4 resolution; depth head and context
  /// blend use 1x1 convs. Bin-center coordinates are divided by coord_scale
  /// before entering the context conv so they are O(1) inputs.
  CameraBranch(Graph& g, const std::string& prefix, int channels, int depth_bins,
               double bin_depth, Rng& rng, double coord_scale = 1.0);

  int channels() const { return channels_; }
  int depth_bins() const { return depth_bins_; }
  double bin_depth() const { return bin_depth_; }

  /// 1 x 3 x H0 x W0 image -> 1 x C x H0/4 x W0/4 features. Throws if H0 or
  /// W0 is not divisible by 4.
  Tensor backbone(Graph& g, const Tensor& image) const;

  /// 1 x C x H x W features -> softmax depth distribution 1 x K x H x W.
  Tensor depth_distribution(Graph& g, const Tensor& features) const;

  /// Context features: V + CNN1(V_depth) + CNN2(V_coord), where V_coord holds
  /// the cylindrical coordinates of the K bin centers per pixel, flattened to
  /// 3K channels (channel k*3 + axis). Returns 1 x C x H x W.
  Tensor context(Graph& g, const Tensor& features, const Tensor& v_depth,
                 const CameraModel& cam) const;

  Tensor image_to_tensor(const Image& img) const;  // 1 x 3 x H x W in [0,1]

 private:
  int channels_;
  int depth_bins_;
  double bin_depth_;
  double coord_scale_;
  Tensor bb1_w_, bb1_b_, bb2_w_, bb2_b_;
  Tensor depth_w_, depth_b_;
  Tensor ctx_depth_w_, ctx_depth_b_, ctx_coord_w_, ctx_coord_b_;
};

/// One camera's lifted outputs.
struct CameraLift {
  Tensor v_depth;    // 1 x K x H x W
  Tensor v_context;  // 1 x C x H x W
};

/// Pseudo point cloud from per-camera depth distributions and context
/// features. Point order: camera-major, then bin, then row, then column.
/// Positions are the ego-frame Cartesian bin centers; the feature of point
/// (n,k,i,j) is V_depth[n,k,i,j] * V_context[n,:,i,j].
PointCloud lift_pseudo_cloud(Graph& g, const std::vector<CameraModel>& cams,
                             const std::vector<CameraLift>& lifts,
                             double bin_depth);

/// Depth supervision targets from a LiDAR cloud: per feature pixel the bin
/// index floor(depth/d) (clamped to K-1) of the nearest projected point, and
/// a per-pixel mask of which pixels have one. targets is N x K x H x W
/// one-hot on supervised pixels, zero elsewhere; mask is N*H*W row-major.
struct DepthTargets {
  Tensor one_hot;              // N x K x H x W (no grad)
  std::vector<uint8_t> mask;   // N*H*W
  int64_t supervised = 0;
};

DepthTargets depth_targets(const std::vector<Vec3>& lidar_points,
                           const std::vector<CameraModel>& cams, int feat_h,
                           int feat_w, int depth_bins, double bin_depth);

}  // namespace cylocc
