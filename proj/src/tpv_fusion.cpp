#include "cylocc/tpv_fusion.hpp"

#include <stdexcept>
#include <string>

namespace cylocc {
namespace {

void check_divisible(int64_t extent, int groups, const char* axis) {
  if (extent % groups != 0)
    throw std::invalid_argument(std::string("group pooling: ") + axis +
                                " extent " + std::to_string(extent) +
                                " not divisible by M=" + std::to_string(groups));
}

}  // namespace

SpatialGroupPool::SpatialGroupPool(Graph& g, const std::string& prefix,
                                   int groups, int channels, Rng& rng)
    : groups_(groups), channels_(channels) {
  if (groups <= 0 || channels <= 0)
    throw std::invalid_argument("group pooling: M and C must be positive");
  const int64_t mc = static_cast<int64_t>(groups) * channels;
  rd_w_ = add_param(g, prefix + ".rd.w", {mc, channels}, mc, rng);
  rd_b_ = add_param(g, prefix + ".rd.b", {channels}, 0, rng);
  dz_w_ = add_param(g, prefix + ".dz.w", {mc, channels}, mc, rng);
  dz_b_ = add_param(g, prefix + ".dz.b", {channels}, 0, rng);
  zr_w_ = add_param(g, prefix + ".zr.w", {mc, channels}, mc, rng);
  zr_b_ = add_param(g, prefix + ".zr.b", {channels}, 0, rng);
}

GroupMaxes SpatialGroupPool::group_maxes(Graph& g, const Tensor& volume) const {
  if (volume.rank() != 4 || volume.extent(3) != channels_)
    throw std::invalid_argument("group pooling: expected R x A x Z x C volume with C=" +
                                std::to_string(channels_));
  const int64_t r = volume.extent(0), a = volume.extent(1), z = volume.extent(2);
  const int64_t c = channels_, m = groups_;
  check_divisible(z, groups_, "height (z)");
  check_divisible(r, groups_, "radius (r)");
  check_divisible(a, groups_, "azimuth");

  GroupMaxes out;
  // R x A plane: pool z in M groups.
  {
    Tensor split = g.reshape(volume, {r, a, m, z / m, c});
    Tensor pooled = g.max_reduce(split, 3);            // r x a x m x c
    out.f_rd = g.reshape(pooled, {r, a, m * c});
  }
  // A x Z plane: pool r.
  {
    Tensor split = g.reshape(volume, {m, r / m, a, z, c});
    Tensor pooled = g.max_reduce(split, 1);            // m x a x z x c
    Tensor azmc = g.transpose(pooled, {1, 2, 0, 3});   // a x z x m x c
    out.f_dz = g.reshape(azmc, {a, z, m * c});
  }
  // Z x R plane: pool azimuth.
  {
    Tensor split = g.reshape(volume, {r, m, a / m, z, c});
    Tensor pooled = g.max_reduce(split, 2);            // r x m x z x c
    Tensor zrmc = g.transpose(pooled, {2, 0, 1, 3});   // z x r x m x c
    out.f_zr = g.reshape(zrmc, {z, r, m * c});
  }
  return out;
}

TpvPlanes SpatialGroupPool::apply(Graph& g, const Tensor& volume) const {
  const GroupMaxes gm = group_maxes(g, volume);
  TpvPlanes out;
  out.f_rd = dense(g, gm.f_rd, rd_w_, rd_b_);
  out.f_dz = dense(g, gm.f_dz, dz_w_, dz_b_);
  out.f_zr = dense(g, gm.f_zr, zr_w_, zr_b_);
  return out;
}

DynamicFusion::DynamicFusion(Graph& g, const std::string& prefix, int channels,
                             Rng& rng)
    : channels_(channels) {
  if (channels <= 0)
    throw std::invalid_argument("dynamic fusion: C must be positive");
  const int64_t c = channels;
  rd_w_ = add_param(g, prefix + ".rd.w", {2 * c, c}, 2 * c, rng);
  rd_b_ = add_param(g, prefix + ".rd.b", {c}, 0, rng);
  dz_w_ = add_param(g, prefix + ".dz.w", {2 * c, c}, 2 * c, rng);
  dz_b_ = add_param(g, prefix + ".dz.b", {c}, 0, rng);
  zr_w_ = add_param(g, prefix + ".zr.w", {2 * c, c}, 2 * c, rng);
  zr_b_ = add_param(g, prefix + ".zr.b", {c}, 0, rng);
}

TpvPlanes DynamicFusion::fuse(Graph& g, const TpvPlanes& cam,
                              const TpvPlanes& lidar) const {
  auto fuse_one = [&](const Tensor& cp, const Tensor& lp, const Tensor& w,
                      const Tensor& b) {
    if (cp.shape() != lp.shape() || cp.rank() != 3 || cp.extent(2) != channels_)
      throw std::invalid_argument("dynamic fusion: plane shape mismatch");
    const Tensor parts[] = {cp, lp};
    Tensor gate = g.sigmoid(dense(g, g.concat(parts, 2), w, b));
    // gate*cam + (1-gate)*lidar, written as lidar + gate*(cam - lidar).
    return g.add(lp, g.mul(gate, g.sub(cp, lp)));
  };
  TpvPlanes out;
  out.f_rd = fuse_one(cam.f_rd, lidar.f_rd, rd_w_, rd_b_);
  out.f_dz = fuse_one(cam.f_dz, lidar.f_dz, dz_w_, dz_b_);
  out.f_zr = fuse_one(cam.f_zr, lidar.f_zr, zr_w_, zr_b_);
  return out;
}

}  // namespace cylocc
