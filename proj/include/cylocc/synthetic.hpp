#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cylocc/formats.hpp"
#include "cylocc/geometry.hpp"

namespace cylocc {

enum class ShapeKind { kBox, kCylinder, kGroundPlane };

/// One solid in the scene. Boxes rotate about z by yaw; cylinders stand on
/// their vertical axis with sx as diameter; ground planes are grid-spanning
/// slabs (yaw ignored for both).
struct SceneObject {
  ShapeKind kind = ShapeKind::kBox;
  int class_id = 1;
  Vec3 center;
  Vec3 size;
  double yaw = 0.0;

  bool contains(Vec3 p) const;  // closed containment
};

struct Scene {
  std::vector<SceneObject> objects;
  uint64_t seed = 0;

  void validate(const CartGridSpec& grid, int class_count) const;
};

/// Text form, one object per line: `shape class cx cy cz sx sy sz yaw`.
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

/// Voxel label = class of the last-listed object containing the voxel
/// center, else 0.
OccGrid make_gt(const Scene& scene, const CartGridSpec& grid, int class_count);

/// Spinning-LiDAR simulation from the ego origin: n_beams elevation rings
/// covering [-40, +10] degrees, n_azimuth rays per ring, nearest analytic
/// hit, Gaussian range noise from a per-ray stream of the scene seed.
/// Features are (x, y, z, 1).
PointCloud render_lidar(const Scene& scene, int n_beams, int n_azimuth,
                        double noise_sd);

/// Ray interval of a solid object; used by rendering and by tests.
/// Returns entry distance along the (unit) direction if the ray hits.
std::optional<double> ray_hit(const SceneObject& obj, Vec3 origin, Vec3 dir);

struct RayHit {
  double t = 0.0;
  int class_id = 0;
};
std::optional<RayHit> nearest_hit(const Scene& scene, Vec3 origin, Vec3 dir);

/// Per-pixel raycast render: class palette color shaded by distance,
/// fixed background where nothing is hit.
Image render_image(const Scene& scene, const CameraModel& cam);
std::vector<Image> render_images(const Scene& scene,
                                 const std::vector<CameraModel>& cams);

/// Palette for class ids (0 = background).
void class_color(int class_id, uint8_t rgb[3]);

/// Toy camera rig: n cameras fanned symmetrically about +x, all at the ego
/// origin, 48x32 pixels.
std::vector<CameraModel> toy_camera_rig(int n_cams = 2);

/// Random scene generator used by synth/training: a ground slab (class 1,
/// top face on a voxel-center plane) plus 3-5 axis-aligned boxes whose face
/// coordinates all lie on voxel-center planes, placed inside the camera fan.
/// This alignment makes noise-free LiDAR hits land in voxels that the GT
/// labels occupied. Box classes cycle over 2..class_count.
Scene random_scene(uint64_t seed, const CartGridSpec& grid, int class_count);

}  // namespace cylocc
