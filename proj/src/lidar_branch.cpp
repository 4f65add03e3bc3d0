#include "cylocc/lidar_branch.hpp"

#include <stdexcept>
#include <vector>

namespace cylocc {

LidarBranch::LidarBranch(Graph& g, const std::string& prefix, int in_dim,
                         int geo_channels, int sem_channels, int out_channels,
                         Rng& rng, double coord_scale)
    : sem_channels_(sem_channels),
      out_channels_(out_channels),
      coord_scale_(coord_scale) {
  if (in_dim <= 0 || geo_channels <= 0 || sem_channels <= 0 || out_channels <= 0)
    throw std::invalid_argument("lidar branch: channel widths must be positive");
  if (coord_scale <= 0.0)
    throw std::invalid_argument("lidar branch: coord scale must be positive");
  const int64_t c1 = geo_channels, c2 = sem_channels, c = out_channels;
  geo1_w_ = add_param(g, prefix + ".geo1.w", {in_dim, c1}, in_dim, rng);
  geo1_b_ = add_param(g, prefix + ".geo1.b", {c1}, 0, rng);
  geo2_w_ = add_param(g, prefix + ".geo2.w", {c1, c1}, c1, rng);
  geo2_b_ = add_param(g, prefix + ".geo2.b", {c1}, 0, rng);
  fuse1_w_ = add_param(g, prefix + ".fuse1.w", {c1 + c2, c}, c1 + c2, rng);
  fuse1_b_ = add_param(g, prefix + ".fuse1.b", {c}, 0, rng);
  fuse2_w_ = add_param(g, prefix + ".fuse2.w", {c, c}, c, rng);
  fuse2_b_ = add_param(g, prefix + ".fuse2.b", {c}, 0, rng);
}

Tensor LidarBranch::geometric_features(Graph& g, const Tensor& attributes) const {
  Tensor scaled = g.scalar_mul(attributes, 1.0 / coord_scale_);
  Tensor h = g.relu(g.linear(scaled, geo1_w_, geo1_b_));
  return g.linear(h, geo2_w_, geo2_b_);
}

Tensor LidarBranch::sample_semantic(Graph& g, const std::vector<Vec3>& positions,
                                    const std::vector<CameraModel>& cams,
                                    const std::vector<Tensor>& context_planes) const {
  if (cams.size() != context_planes.size())
    throw std::invalid_argument("sample_semantic: camera / plane count mismatch");
  const int64_t n = static_cast<int64_t>(positions.size());
  if (n == 0) throw std::invalid_argument("sample_semantic: empty cloud");

  std::vector<int> seen(static_cast<size_t>(n), 0);
  Tensor acc;  // n x C2 running sum over cameras
  for (size_t ci = 0; ci < cams.size(); ++ci) {
    const Tensor& img = context_planes[ci];
    if (img.rank() != 4 || img.extent(0) != 1 || img.extent(1) != sem_channels_)
      throw std::invalid_argument("sample_semantic: context plane must be 1 x C2 x H x W");
    const CameraModel& cam = cams[ci];
    const double stride_h = static_cast<double>(cam.height) / img.extent(2);
    const double stride_w = static_cast<double>(cam.width) / img.extent(3);

    Tensor queries = Tensor::zeros({n, 2});
    Tensor mask = Tensor::zeros({n, 1});
    auto qv = queries.mutable_data();
    auto mv = mask.mutable_data();
    const std::vector<Projection> prs = project_to_image(positions, cam);
    for (int64_t p = 0; p < n; ++p) {
      const Projection& pr = prs[static_cast<size_t>(p)];
      if (!pr.visible) continue;
      qv[2 * p] = pr.v / stride_h - 0.5;
      qv[2 * p + 1] = pr.u / stride_w - 0.5;
      mv[p] = 1.0;
      ++seen[static_cast<size_t>(p)];
    }

    Tensor plane = image_to_plane(g, img);  // H x W x C2
    Tensor samples = g.bilinear_sample_2d(plane, queries, BoundaryMode::kClamp,
                                          BoundaryMode::kClamp);
    Tensor masked = g.mul(samples, g.broadcast(mask, {n, sem_channels_}));
    acc = acc.defined() ? g.add(acc, masked) : masked;
  }

  Tensor weight = Tensor::zeros({n, 1});
  auto wv = weight.mutable_data();
  for (int64_t p = 0; p < n; ++p)
    if (seen[static_cast<size_t>(p)] > 0) wv[p] = 1.0 / seen[static_cast<size_t>(p)];
  if (!acc.defined()) return Tensor::zeros({n, sem_channels_});
  return g.mul(acc, g.broadcast(weight, {n, sem_channels_}));
}

Tensor LidarBranch::fuse(Graph& g, const Tensor& geo, const Tensor& sem) const {
  const Tensor parts[] = {geo, sem};
  Tensor cat = g.concat(parts, 1);
  Tensor h = g.relu(g.linear(cat, fuse1_w_, fuse1_b_));
  return g.linear(h, fuse2_w_, fuse2_b_);
}

PointCloud LidarBranch::run(Graph& g, const PointCloud& raw,
                            const std::vector<CameraModel>& cams,
                            const std::vector<Tensor>& context_planes) const {
  raw.validate();
  PointCloud out;
  out.positions = raw.positions;
  if (raw.size() == 0) return out;
  Tensor geo = geometric_features(g, raw.features);
  Tensor sem = sample_semantic(g, raw.positions, cams, context_planes);
  out.features = fuse(g, geo, sem);
  return out;
}

}  // namespace cylocc
