#include "cylocc/camera_branch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cylocc {

CameraBranch::CameraBranch(Graph& g, const std::string& prefix, int channels,
                           int depth_bins, double bin_depth, Rng& rng,
                           double coord_scale)
    : channels_(channels),
      depth_bins_(depth_bins),
      bin_depth_(bin_depth),
      coord_scale_(coord_scale) {
  if (channels <= 0 || depth_bins <= 0 || bin_depth <= 0.0 || coord_scale <= 0.0)
    throw std::invalid_argument("camera branch: channels, depth bins, bin depth and coord scale must be positive");
  const int64_t c = channels, k = depth_bins;
  bb1_w_ = add_param(g, prefix + ".bb1.w", {c, 3, 3, 3}, 3 * 9, rng);
  bb1_b_ = add_param(g, prefix + ".bb1.b", {c}, 0, rng);
  bb2_w_ = add_param(g, prefix + ".bb2.w", {c, c, 3, 3}, c * 9, rng);
  bb2_b_ = add_param(g, prefix + ".bb2.b", {c}, 0, rng);
  depth_w_ = add_param(g, prefix + ".depth.w", {k, c, 1, 1}, c, rng, 0.01);
  depth_b_ = add_param(g, prefix + ".depth.b", {k}, 0, rng);
  ctx_depth_w_ = add_param(g, prefix + ".ctx_depth.w", {c, k, 1, 1}, k, rng);
  ctx_depth_b_ = add_param(g, prefix + ".ctx_depth.b", {c}, 0, rng);
  ctx_coord_w_ = add_param(g, prefix + ".ctx_coord.w", {c, 3 * k, 1, 1}, 3 * k, rng);
  ctx_coord_b_ = add_param(g, prefix + ".ctx_coord.b", {c}, 0, rng);
}

Tensor CameraBranch::backbone(Graph& g, const Tensor& image) const {
  if (image.rank() != 4 || image.extent(0) != 1 || image.extent(1) != 3)
    throw std::invalid_argument("backbone: expected 1 x 3 x H x W image");
  if (image.extent(2) % 4 != 0 || image.extent(3) % 4 != 0)
    throw std::invalid_argument(
        "backbone: image extents " + std::to_string(image.extent(2)) + "x" +
        std::to_string(image.extent(3)) + " must be divisible by 4");
  Conv2dSpec down{.stride = 2, .pad_h = 1, .pad_w = 1};
  Tensor h1 = g.relu(g.conv2d(image, bb1_w_, bb1_b_, down));
  return g.relu(g.conv2d(h1, bb2_w_, bb2_b_, down));
}

Tensor CameraBranch::depth_distribution(Graph& g, const Tensor& features) const {
  Tensor logits = g.conv2d(features, depth_w_, depth_b_, Conv2dSpec{});
  return g.softmax(logits, 1);
}

Tensor CameraBranch::context(Graph& g, const Tensor& features,
                             const Tensor& v_depth,
                             const CameraModel& cam) const {
  if (features.rank() != 4 || v_depth.rank() != 4 ||
      features.extent(2) != v_depth.extent(2) ||
      features.extent(3) != v_depth.extent(3))
    throw std::invalid_argument("context: feature / depth grid mismatch");
  const int64_t h = features.extent(2), w = features.extent(3);
  const int64_t k = depth_bins_;

  // Constant positional volume: channel k*3 + axis holds cylindrical
  // coordinate `axis` of bin k's center behind each pixel.
  Tensor coords = depth_bin_coords(cam, static_cast<int>(h), static_cast<int>(w),
                                   static_cast<int>(k), bin_depth_);
  Tensor coord_img = Tensor::zeros({1, 3 * k, h, w});
  auto src = coords.data();
  auto dst = coord_img.mutable_data();
  for (int64_t kb = 0; kb < k; ++kb)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        for (int64_t axis = 0; axis < 3; ++axis)
          dst[((kb * 3 + axis) * h + i) * w + j] =
              src[((kb * h + i) * w + j) * 3 + axis] / coord_scale_;

  Tensor from_depth = g.conv2d(v_depth, ctx_depth_w_, ctx_depth_b_, Conv2dSpec{});
  Tensor from_coord = g.conv2d(coord_img, ctx_coord_w_, ctx_coord_b_, Conv2dSpec{});
  return g.add(features, g.add(from_depth, from_coord));
}

Tensor CameraBranch::image_to_tensor(const Image& img) const {
  Tensor t = Tensor::zeros({1, 3, img.height, img.width});
  auto v = t.mutable_data();
  for (int64_t ch = 0; ch < 3; ++ch)
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        v[(ch * img.height + y) * img.width + x] =
            img.pixels[static_cast<size_t>((y * img.width + x) * 3 + ch)] / 255.0;
  return t;
}

PointCloud lift_pseudo_cloud(Graph& g, const std::vector<CameraModel>& cams,
                             const std::vector<CameraLift>& lifts,
                             double bin_depth) {
  if (cams.size() != lifts.size())
    throw std::invalid_argument("lift_pseudo_cloud: camera / lift count mismatch");
  if (cams.empty())
    throw std::invalid_argument("lift_pseudo_cloud: no cameras");

  PointCloud cloud;
  std::vector<Tensor> parts;
  for (size_t n = 0; n < cams.size(); ++n) {
    const Tensor& vd = lifts[n].v_depth;
    const Tensor& vc = lifts[n].v_context;
    const int64_t k = vd.extent(1), h = vd.extent(2), w = vd.extent(3);
    const int64_t c = vc.extent(1);
    if (vc.extent(2) != h || vc.extent(3) != w)
      throw std::invalid_argument("lift_pseudo_cloud: depth / context grid mismatch");

    Tensor d_b = g.broadcast(g.reshape(vd, {k, 1, h, w}), {k, c, h, w});
    Tensor c_b = g.broadcast(g.reshape(vc, {1, c, h, w}), {k, c, h, w});
    Tensor prod = g.mul(d_b, c_b);                        // k x c x h x w
    Tensor khwc = g.transpose(prod, {0, 2, 3, 1});        // k x h x w x c
    parts.push_back(g.reshape(khwc, {k * h * w, c}));

    Tensor coords = depth_bin_coords(cams[n], static_cast<int>(h),
                                     static_cast<int>(w), static_cast<int>(k),
                                     bin_depth);
    auto cv = coords.data();
    for (int64_t kb = 0; kb < k; ++kb)
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
          const size_t base = static_cast<size_t>(((kb * h + i) * w + j) * 3);
          cloud.positions.push_back(
              cyl_to_cart({cv[base], cv[base + 1], cv[base + 2]}));
        }
  }
  cloud.features = g.concat(parts, 0);
  return cloud;
}

DepthTargets depth_targets(const std::vector<Vec3>& lidar_points,
                           const std::vector<CameraModel>& cams, int feat_h,
                           int feat_w, int depth_bins, double bin_depth) {
  if (feat_h <= 0 || feat_w <= 0 || depth_bins <= 0 || bin_depth <= 0.0)
    throw std::invalid_argument("depth_targets: non-positive grid parameter");
  const int64_t n_cam = static_cast<int64_t>(cams.size());
  DepthTargets out;
  out.one_hot = Tensor::zeros({n_cam, depth_bins, feat_h, feat_w});
  out.mask.assign(static_cast<size_t>(n_cam) * feat_h * feat_w, 0);

  std::vector<double> best(out.mask.size(),
                           std::numeric_limits<double>::infinity());
  auto oh = out.one_hot.mutable_data();
  for (int64_t n = 0; n < n_cam; ++n) {
    const CameraModel& cam = cams[static_cast<size_t>(n)];
    const double stride_h = static_cast<double>(cam.height) / feat_h;
    const double stride_w = static_cast<double>(cam.width) / feat_w;
    for (const Vec3& p : lidar_points) {
      const Projection pr = project_to_image(p, cam);
      if (!pr.visible) continue;
      const int64_t fi = static_cast<int64_t>(std::floor(pr.v / stride_h));
      const int64_t fj = static_cast<int64_t>(std::floor(pr.u / stride_w));
      if (fi < 0 || fi >= feat_h || fj < 0 || fj >= feat_w) continue;
      const size_t px = static_cast<size_t>((n * feat_h + fi) * feat_w + fj);
      if (pr.depth >= best[px]) continue;
      if (out.mask[px]) {
        // Clear the previous (farther) point's bin.
        for (int64_t k = 0; k < depth_bins; ++k)
          oh[(static_cast<size_t>(n) * depth_bins + k) * feat_h * feat_w +
             static_cast<size_t>(fi * feat_w + fj)] = 0.0;
      } else {
        out.mask[px] = 1;
        ++out.supervised;
      }
      best[px] = pr.depth;
      const int64_t bin = std::min<int64_t>(
          static_cast<int64_t>(std::floor(pr.depth / bin_depth)),
          depth_bins - 1);
      oh[(static_cast<size_t>(n) * depth_bins + bin) * feat_h * feat_w +
         static_cast<size_t>(fi * feat_w + fj)] = 1.0;
    }
  }
  return out;
}

}  // namespace cylocc
