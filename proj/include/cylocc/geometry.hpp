#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "cylocc/tensor.hpp"

namespace cylocc {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

/// Row-major 3x3 matrix.
struct Mat3 {
  double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  /// Rotation about +z by yaw radians (counterclockwise looking down -z).
  static Mat3 rot_z(double yaw);

  Vec3 operator*(Vec3 v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const;
  Mat3 transposed() const;
};

struct CartGridSpec {
  double x_min = -50.0, x_max = 50.0;
  double y_min = -50.0, y_max = 50.0;
  double z_min = -5.0, z_max = 3.0;
  int nx = 200, ny = 200, nz = 16;

  void validate() const;
  double dx() const { return (x_max - x_min) / nx; }
  double dy() const { return (y_max - y_min) / ny; }
  double dz() const { return (z_max - z_min) / nz; }
  Vec3 voxel_center(int ix, int iy, int iz) const {
    return {x_min + (ix + 0.5) * dx(), y_min + (iy + 0.5) * dy(),
            z_min + (iz + 0.5) * dz()};
  }
};

/// Azimuth always spans [-pi, pi) with uniform bins.
struct CylGridSpec {
  double r_min = 0.0, r_max = 14.2;
  int radial_bins = 24, azimuth_bins = 32, z_bins = 8;
  double z_min = -2.0, z_max = 2.0;

  void validate() const;
  double dr() const { return (r_max - r_min) / radial_bins; }
  double dtheta() const { return 2.0 * std::numbers::pi / azimuth_bins; }
  double dz() const { return (z_max - z_min) / z_bins; }

  /// Bin of a cylindrical point (r, theta, z). Radial and height ranges are
  /// half-open; returns false when the point falls outside them. theta must
  /// already be in [-pi, pi).
  bool bin_of(Vec3 cyl, int& ir, int& ia, int& iz) const;
  int azimuth_bin(double theta) const;
};

/// Pinhole camera. rotation maps ego to camera frame (rows are the camera
/// axes expressed in ego coordinates): x right, y down, z forward.
struct CameraModel {
  Mat3 intrinsics;
  Mat3 rotation;
  Vec3 translation;
  int width = 0, height = 0;

  void validate() const;
  Vec3 to_camera(Vec3 p_ego) const { return rotation * p_ego + translation; }
  Vec3 to_ego(Vec3 p_cam) const { return rotation.transposed() * (p_cam - translation); }
};

inline constexpr double kNearClip = 0.1;  // meters, camera forward axis

struct Projection {
  double u = 0.0, v = 0.0, depth = 0.0;
  bool visible = false;
};

/// (x,y,z) -> (r, theta, z) with r >= 0 and theta in [-pi, pi). The origin
/// maps to theta = 0.
Vec3 cart_to_cyl(Vec3 p);

/// (r, theta, z) -> (x,y,z). Throws on negative radius.
Vec3 cyl_to_cart(Vec3 cyl);

/// Projects an ego-frame point. visible requires depth beyond the near clip
/// and (u,v) inside the image rectangle. Invisible points still carry their
/// computed coordinates.
Projection project_to_image(Vec3 p_ego, const CameraModel& cam);
std::vector<Projection> project_to_image(const std::vector<Vec3>& pts,
                                         const CameraModel& cam);

/// Cylindrical ego-frame coordinates of depth-bin centers along the ray of
/// every feature-grid pixel: shape K x feat_h x feat_w x 3 (r, theta, z).
/// Bin k sits at camera-forward depth (k + 0.5) * d. Feature pixel (i, j)
/// back-projects through image point ((j+0.5)*width/feat_w, (i+0.5)*height/feat_h).
Tensor depth_bin_coords(const CameraModel& cam, int feat_h, int feat_w, int K,
                        double d);

}  // namespace cylocc
