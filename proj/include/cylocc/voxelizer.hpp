#pragma once

#include <cstdint>
#include <vector>

#include "cylocc/formats.hpp"
#include "cylocc/geometry.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// Cylindrical feature volume: channel-wise max of the features of the
/// points falling in each bin; empty bins hold 0.
struct CylVolume {
  CylGridSpec spec;
  Tensor features;  // R x A x Z x C
  std::vector<uint8_t> occupied;  // R*A*Z, bin order (r-major, z fastest)
  int64_t discarded = 0;

  bool occupied_at(int ir, int ia, int iz) const {
    return occupied[(static_cast<size_t>(ir) * spec.azimuth_bins + ia) *
                        spec.z_bins + iz] != 0;
  }
};

/// Scatter-max voxelization. Points outside the radial or height range are
/// discarded and counted; gradients route to the per-(bin, channel) argmax
/// point, ties broken by lowest point index.
CylVolume voxelize(Graph& g, const PointCloud& cloud, const CylGridSpec& spec);

/// All-empty volume with an explicit channel width (for clouds with no
/// points, whose feature tensor cannot reveal one).
CylVolume empty_volume(const CylGridSpec& spec, int64_t channels);

}  // namespace cylocc
