#include "cylocc/geometry.hpp"

#include <stdexcept>
#include <string>

namespace cylocc {

namespace {
constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}
}  // namespace

Mat3 Mat3::rot_z(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r.m[0] = c;  r.m[1] = -s; r.m[2] = 0;
  r.m[3] = s;  r.m[4] = c;  r.m[5] = 0;
  r.m[6] = 0;  r.m[7] = 0;  r.m[8] = 1;
  return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m[i * 3 + k] * o.m[k * 3 + j];
      r.m[i * 3 + j] = acc;
    }
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = m[j * 3 + i];
  return r;
}

void CartGridSpec::validate() const {
  if (x_max <= x_min || y_max <= y_min || z_max <= z_min)
    fail("cart grid: max must exceed min on every axis");
  if (nx <= 0 || ny <= 0 || nz <= 0) fail("cart grid: bin counts must be positive");
}

void CylGridSpec::validate() const {
  if (r_min < 0.0) fail("cyl grid: r_min must be non-negative");
  if (r_max <= r_min || z_max <= z_min) fail("cyl grid: max must exceed min");
  if (radial_bins <= 0 || azimuth_bins <= 0 || z_bins <= 0)
    fail("cyl grid: bin counts must be positive");
}

int CylGridSpec::azimuth_bin(double theta) const {
  int ia = static_cast<int>(std::floor((theta + kPi) / dtheta()));
  if (ia < 0) ia = 0;
  if (ia >= azimuth_bins) ia = azimuth_bins - 1;  // rounding at theta -> pi
  return ia;
}

bool CylGridSpec::bin_of(Vec3 cyl, int& ir, int& ia, int& iz) const {
  if (cyl.x < r_min || cyl.x >= r_max) return false;
  if (cyl.z < z_min || cyl.z >= z_max) return false;
  ir = static_cast<int>(std::floor((cyl.x - r_min) / dr()));
  if (ir >= radial_bins) ir = radial_bins - 1;
  ia = azimuth_bin(cyl.y);
  iz = static_cast<int>(std::floor((cyl.z - z_min) / dz()));
  if (iz >= z_bins) iz = z_bins - 1;
  return true;
}

void CameraModel::validate() const {
  const auto& k = intrinsics.m;
  if (k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0)
    fail("camera: intrinsics must be upper-triangular with unit bottom-right");
  if (k[0] <= 0.0 || k[4] <= 0.0) fail("camera: focal lengths must be positive");
  const Mat3 rtr = rotation.transposed() * rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(rtr.m[i * 3 + j] - want) > 1e-9)
        fail("camera: rotation is not orthonormal");
    }
  if (width <= 0 || height <= 0) fail("camera: image size must be positive");
}

Vec3 cart_to_cyl(Vec3 p) {
  const double r = std::hypot(p.x, p.y);
  double theta = (p.x == 0.0 && p.y == 0.0) ? 0.0 : std::atan2(p.y, p.x);
  if (theta >= kPi) theta = -kPi;  // atan2 returns +pi for (-x, +-0)
  return {r, theta, p.z};
}

Vec3 cyl_to_cart(Vec3 cyl) {
  if (cyl.x < 0.0) fail("cyl_to_cart: negative radius");
  return {cyl.x * std::cos(cyl.y), cyl.x * std::sin(cyl.y), cyl.z};
}

Projection project_to_image(Vec3 p_ego, const CameraModel& cam) {
  const Vec3 pc = cam.to_camera(p_ego);
  Projection out;
  out.depth = pc.z;
  if (pc.z > 0.0) {
    const auto& k = cam.intrinsics.m;
    out.u = (k[0] * pc.x + k[1] * pc.y) / pc.z + k[2];
    out.v = (k[4] * pc.y) / pc.z + k[5];
  }
  out.visible = pc.z > kNearClip && out.u >= 0.0 && out.u < cam.width &&
                out.v >= 0.0 && out.v < cam.height;
  return out;
}

std::vector<Projection> project_to_image(const std::vector<Vec3>& pts,
                                         const CameraModel& cam) {
  std::vector<Projection> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) out.push_back(project_to_image(p, cam));
  return out;
}

Tensor depth_bin_coords(const CameraModel& cam, int feat_h, int feat_w, int K,
                        double d) {
  if (K <= 0) fail("depth_bin_coords: K must be positive");
  if (d <= 0.0) fail("depth_bin_coords: bin interval must be positive");
  if (feat_h <= 0 || feat_w <= 0) fail("depth_bin_coords: feature grid must be positive");
  const auto& k = cam.intrinsics.m;
  const double fx = k[0], skew = k[1], cx = k[2], fy = k[4], cy = k[5];
  const double stride_w = static_cast<double>(cam.width) / feat_w;
  const double stride_h = static_cast<double>(cam.height) / feat_h;
  Tensor out = Tensor::zeros({K, feat_h, feat_w, 3});
  auto ov = out.mutable_data();
  int64_t off = 0;
  for (int bin = 0; bin < K; ++bin) {
    const double depth = (bin + 0.5) * d;
    for (int i = 0; i < feat_h; ++i) {
      const double v = (i + 0.5) * stride_h;
      for (int j = 0; j < feat_w; ++j) {
        const double u = (j + 0.5) * stride_w;
        // unit-forward ray direction: z component is 1
        const double ry = (v - cy) / fy;
        const double rx = (u - cx - skew * ry) / fx;
        const Vec3 p_cam{rx * depth, ry * depth, depth};
        const Vec3 cyl = cart_to_cyl(cam.to_ego(p_cam));
        ov[off++] = cyl.x;
        ov[off++] = cyl.y;
        ov[off++] = cyl.z;
      }
    }
  }
  return out;
}

}  // namespace cylocc
