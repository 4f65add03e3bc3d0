#include "cylocc/voxelizer.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cylocc {
namespace {

struct ScatterMaxNode final : Node {
  ScatterMaxNode(Tensor points, Tensor out, std::vector<int64_t> argmax)
      : Node("scatter_max"),
        points_(std::move(points)),
        out_(std::move(out)),
        argmax_(std::move(argmax)) {}

  void backward() override {
    if (!points_.requires_grad()) return;
    std::span<const double> go = out_.grad();
    std::span<double> gp = points_.grad_mutable();
    const int64_t c = points_.extent(1);
    for (size_t slot = 0; slot < argmax_.size(); ++slot) {
      const int64_t p = argmax_[slot];
      if (p < 0) continue;
      gp[static_cast<size_t>(p) * c + slot % c] += go[slot];
    }
  }

  Tensor points_;
  Tensor out_;
  std::vector<int64_t> argmax_;  // one entry per (bin, channel) slot
};

}  // namespace

CylVolume empty_volume(const CylGridSpec& spec, int64_t channels) {
  spec.validate();
  if (channels <= 0)
    throw std::invalid_argument("empty_volume: channels must be positive");
  CylVolume vol;
  vol.spec = spec;
  vol.features = Tensor::zeros({spec.radial_bins, spec.azimuth_bins,
                                spec.z_bins, channels});
  vol.occupied.assign(static_cast<size_t>(spec.radial_bins) *
                          spec.azimuth_bins * spec.z_bins, 0);
  return vol;
}

CylVolume voxelize(Graph& g, const PointCloud& cloud, const CylGridSpec& spec) {
  spec.validate();
  cloud.validate();
  const int64_t n = cloud.size();
  const int64_t c = cloud.features.defined() ? cloud.features.extent(1) : 0;
  if (n > 0 && c == 0) {
    throw std::invalid_argument("voxelize: point cloud has zero-width features");
  }

  const int64_t bins = static_cast<int64_t>(spec.radial_bins) *
                       spec.azimuth_bins * spec.z_bins;
  CylVolume vol;
  vol.spec = spec;
  vol.occupied.assign(static_cast<size_t>(bins), 0);
  if (n == 0) {
    vol.features = Tensor::zeros({spec.radial_bins, spec.azimuth_bins,
                                  spec.z_bins, c > 0 ? c : 1});
    return vol;
  }

  Tensor out = Tensor::zeros({spec.radial_bins, spec.azimuth_bins,
                              spec.z_bins, c});
  std::vector<int64_t> argmax(static_cast<size_t>(bins * c), -1);
  std::span<const double> feat = cloud.features.data();
  std::span<double> dst = out.mutable_data();

  for (int64_t p = 0; p < n; ++p) {
    const Vec3 cyl = cart_to_cyl(cloud.positions[static_cast<size_t>(p)]);
    int ir = 0, ia = 0, iz = 0;
    if (!spec.bin_of(cyl, ir, ia, iz)) {
      ++vol.discarded;
      continue;
    }
    const size_t bin = (static_cast<size_t>(ir) * spec.azimuth_bins + ia) *
                           spec.z_bins + iz;
    vol.occupied[bin] = 1;
    for (int64_t ch = 0; ch < c; ++ch) {
      const size_t slot = bin * c + ch;
      const double v = feat[static_cast<size_t>(p) * c + ch];
      if (argmax[slot] < 0 || v > dst[slot]) {
        dst[slot] = v;
        argmax[slot] = p;
      }
    }
  }

  if (cloud.features.requires_grad()) {
    out.set_requires_grad(true);
    g.record(std::make_unique<ScatterMaxNode>(cloud.features, out,
                                              std::move(argmax)));
  }
  vol.features = out;
  return vol;
}

}  // namespace cylocc
