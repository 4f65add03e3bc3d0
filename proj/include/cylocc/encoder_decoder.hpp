#pragma once

#include <array>
#include <string>
#include <vector>

#include "cylocc/nn.hpp"
#include "cylocc/tensor.hpp"
#include "cylocc/tpv_fusion.hpp"

namespace cylocc {

/// Which plane axis wraps around (the azimuth axis gets circular conv
/// padding, the others zero padding).
enum class AzimuthAxis { kNone, kRows, kCols };

/// Multi-scale refinement shared by all three planes: three stride-2 3x3
/// encoder convs, 1x1 lateral convs, and nearest-neighbor top-down merging.
/// One parameter set serves every plane.
class PlaneEncoderDecoder {
 public:
  static constexpr int kScales = 4;

  PlaneEncoderDecoder(Graph& g, const std::string& prefix, int channels,
                      Rng& rng);

  /// plane: H x W x C with H, W divisible by 8. Returns kScales planes,
  /// scale l of shape H/2^l x W/2^l x C (scale 0 first).
  std::vector<Tensor> refine(Graph& g, const Tensor& plane,
                             AzimuthAxis wrap) const;

 private:
  int channels_;
  std::array<Tensor, 3> enc_w_, enc_b_;
  std::array<Tensor, kScales> lat_w_, lat_b_;
};

/// All three planes at every scale; scales[l] holds the 2^-l resolution set.
struct MultiScalePlanes {
  std::array<TpvPlanes, PlaneEncoderDecoder::kScales> scales;
};

/// Runs the shared network on the fused planes. The azimuth axis wraps:
/// columns of f_rd (R x A), rows of f_dz (A x Z), no wrap for f_zr (Z x R).
MultiScalePlanes refine_planes(Graph& g, const PlaneEncoderDecoder& net,
                               const TpvPlanes& fused);

}  // namespace cylocc
