#pragma once

#include <string>
#include <vector>

#include "cylocc/camera_branch.hpp"
#include "cylocc/formats.hpp"
#include "cylocc/geometry.hpp"
#include "cylocc/nn.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// Per-point LiDAR features: a geometric MLP on the raw point attributes,
/// plus image semantics bilinearly sampled from the camera context planes at
/// each point's projection (averaged over the cameras that see it).
class LidarBranch {
 public:
  /// geo MLP: in_dim -> C1 -> C1; fuse MLP: (C1 + C2) -> C -> C. Raw
  /// attributes are divided by coord_scale before the geo MLP so
  /// coordinate-valued columns are O(1) inputs.
  LidarBranch(Graph& g, const std::string& prefix, int in_dim, int geo_channels,
              int sem_channels, int out_channels, Rng& rng,
              double coord_scale = 1.0);

  int out_channels() const { return out_channels_; }
  int sem_channels() const { return sem_channels_; }

  /// N x in_dim raw attributes -> N x C1.
  Tensor geometric_features(Graph& g, const Tensor& attributes) const;

  /// Samples each camera's context plane (1 x C2 x H x W) at the image
  /// projection of every point; mean over cameras that see the point, zeros
  /// for points no camera sees. Returns N x C2.
  Tensor sample_semantic(Graph& g, const std::vector<Vec3>& positions,
                         const std::vector<CameraModel>& cams,
                         const std::vector<Tensor>& context_planes) const;

  /// concat(geo, sem) -> MLP -> N x C.
  Tensor fuse(Graph& g, const Tensor& geo, const Tensor& sem) const;

  /// Full branch: returns a cloud with the original positions and fused
  /// per-point features.
  PointCloud run(Graph& g, const PointCloud& raw,
                 const std::vector<CameraModel>& cams,
                 const std::vector<Tensor>& context_planes) const;

 private:
  int sem_channels_;
  int out_channels_;
  double coord_scale_;
  Tensor geo1_w_, geo1_b_, geo2_w_, geo2_b_;
  Tensor fuse1_w_, fuse1_b_, fuse2_w_, fuse2_b_;
};

}  // namespace cylocc
