#include "cylocc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cylocc/rng.hpp"

namespace cylocc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRayEps = 1e-9;
constexpr uint8_t kBackgroundR = 18, kBackgroundG = 22, kBackgroundB = 30;

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool empty() const { return lo > hi; }
};

// Intersects [lo, hi] for one slab axis: |q + t*d| <= half.
bool clip_slab(double q, double d, double half, Interval& iv) {
  if (std::abs(d) < 1e-300) return std::abs(q) <= half;
  double t0 = (-half - q) / d;
  double t1 = (half - q) / d;
  if (t0 > t1) std::swap(t0, t1);
  iv.lo = std::max(iv.lo, t0);
  iv.hi = std::min(iv.hi, t1);
  return true;
}

// Interval of the ray inside the solid, or empty.
Interval solid_interval(const SceneObject& obj, Vec3 origin, Vec3 dir) {
  Interval iv;
  const Vec3 rel = origin - obj.center;
  if (obj.kind == ShapeKind::kCylinder) {
    if (!clip_slab(rel.z, dir.z, obj.size.z / 2, iv)) return {1, 0};
    const double a = dir.x * dir.x + dir.y * dir.y;
    const double b = 2.0 * (rel.x * dir.x + rel.y * dir.y);
    const double radius = obj.size.x / 2;
    const double c = rel.x * rel.x + rel.y * rel.y - radius * radius;
    if (a < 1e-300) {
      if (c > 0.0) return {1, 0};
      return iv;
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return {1, 0};
    const double root = std::sqrt(disc);
    iv.lo = std::max(iv.lo, (-b - root) / (2.0 * a));
    iv.hi = std::min(iv.hi, (-b + root) / (2.0 * a));
    return iv;
  }
  // Boxes and ground slabs: slab method in the object frame.
  const Mat3 inv = Mat3::rot_z(-obj.yaw);
  const Vec3 q = obj.yaw != 0.0 ? inv * rel : rel;
  const Vec3 d = obj.yaw != 0.0 ? inv * dir : dir;
  if (!clip_slab(q.x, d.x, obj.size.x / 2, iv)) return {1, 0};
  if (!clip_slab(q.y, d.y, obj.size.y / 2, iv)) return {1, 0};
  if (!clip_slab(q.z, d.z, obj.size.z / 2, iv)) return {1, 0};
  return iv;
}

const char* shape_token(ShapeKind k) {
  switch (k) {
    case ShapeKind::kBox: return "box";
    case ShapeKind::kCylinder: return "cylinder";
    case ShapeKind::kGroundPlane: return "ground-plane";
  }
  return "box";
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool SceneObject::contains(Vec3 p) const {
  const Vec3 rel = p - center;
  if (kind == ShapeKind::kCylinder) {
    const double radius = size.x / 2;
    return rel.x * rel.x + rel.y * rel.y <= radius * radius &&
           std::abs(rel.z) <= size.z / 2;
  }
  const Vec3 q = yaw != 0.0 ? Mat3::rot_z(-yaw) * rel : rel;
  return std::abs(q.x) <= size.x / 2 && std::abs(q.y) <= size.y / 2 &&
         std::abs(q.z) <= size.z / 2;
}

void Scene::validate(const CartGridSpec& grid, int class_count) const {
  for (size_t i = 0; i < objects.size(); ++i) {
    const SceneObject& o = objects[i];
    if (o.class_id < 1 || o.class_id > class_count)
      throw std::invalid_argument("scene object " + std::to_string(i) +
                                  ": class " + std::to_string(o.class_id) +
                                  " outside 1.." + std::to_string(class_count));
    if (o.size.x <= 0 || o.size.y <= 0 || o.size.z <= 0)
      throw std::invalid_argument("scene object " + std::to_string(i) +
                                  ": non-positive size");
    double reach_x, reach_y;
    if (o.kind == ShapeKind::kCylinder) {
      reach_x = reach_y = o.size.x / 2;
    } else if (o.yaw != 0.0) {
      reach_x = reach_y = 0.5 * std::hypot(o.size.x, o.size.y);
    } else {
      reach_x = o.size.x / 2;
      reach_y = o.size.y / 2;
    }
    if (o.center.x - reach_x < grid.x_min || o.center.x + reach_x > grid.x_max ||
        o.center.y - reach_y < grid.y_min || o.center.y + reach_y > grid.y_max ||
        o.center.z - o.size.z / 2 < grid.z_min ||
        o.center.z + o.size.z / 2 > grid.z_max)
      throw std::invalid_argument("scene object " + std::to_string(i) +
                                  " extends outside the grid range");
  }
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  for (const SceneObject& o : scene.objects) {
    os << shape_token(o.kind) << " " << o.class_id << " " << fmt_double(o.center.x)
       << " " << fmt_double(o.center.y) << " " << fmt_double(o.center.z) << " "
       << fmt_double(o.size.x) << " " << fmt_double(o.size.y) << " "
       << fmt_double(o.size.z) << " " << fmt_double(o.yaw) << "\n";
  }
  if (!os) throw std::runtime_error(path + ": write failed");
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open");
  Scene scene;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string shape;
    SceneObject o;
    ls >> shape >> o.class_id >> o.center.x >> o.center.y >> o.center.z >>
        o.size.x >> o.size.y >> o.size.z >> o.yaw;
    if (!ls)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `shape class cx cy cz sx sy sz yaw`");
    if (shape == "box")
      o.kind = ShapeKind::kBox;
    else if (shape == "cylinder")
      o.kind = ShapeKind::kCylinder;
    else if (shape == "ground-plane")
      o.kind = ShapeKind::kGroundPlane;
    else
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown shape '" + shape + "'");
    scene.objects.push_back(o);
  }
  return scene;
}

OccGrid make_gt(const Scene& scene, const CartGridSpec& grid, int class_count) {
  OccGrid out = OccGrid::empty(grid.nx, grid.ny, grid.nz, class_count);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int iz = 0; iz < grid.nz; ++iz) {
        const Vec3 c = grid.voxel_center(ix, iy, iz);
        int label = 0;
        for (const SceneObject& o : scene.objects)
          if (o.contains(c)) label = o.class_id;
        out.at(ix, iy, iz) = static_cast<uint8_t>(label);
      }
  return out;
}

std::optional<double> ray_hit(const SceneObject& obj, Vec3 origin, Vec3 dir) {
  const Interval iv = solid_interval(obj, origin, dir);
  if (iv.empty() || iv.hi <= kRayEps || iv.lo <= kRayEps) return std::nullopt;
  return iv.lo;
}

std::optional<RayHit> nearest_hit(const Scene& scene, Vec3 origin, Vec3 dir) {
  std::optional<RayHit> best;
  for (const SceneObject& o : scene.objects) {
    const auto t = ray_hit(o, origin, dir);
    if (t && (!best || *t < best->t)) best = RayHit{*t, o.class_id};
  }
  return best;
}

PointCloud render_lidar(const Scene& scene, int n_beams, int n_azimuth,
                        double noise_sd) {
  if (n_beams <= 0 || n_azimuth <= 0)
    throw std::invalid_argument("lidar lattice must be positive");
  const double elev_lo = -40.0 * kPi / 180.0;
  const double elev_hi = 10.0 * kPi / 180.0;
  Rng base(scene.seed);
  std::vector<Vec3> positions;
  std::vector<double> feats;
  for (int b = 0; b < n_beams; ++b) {
    const double elev = n_beams == 1
                            ? 0.5 * (elev_lo + elev_hi)
                            : elev_lo + b * (elev_hi - elev_lo) / (n_beams - 1);
    const double ce = std::cos(elev), se = std::sin(elev);
    for (int a = 0; a < n_azimuth; ++a) {
      const double az = -kPi + (a + 0.5) * 2.0 * kPi / n_azimuth;
      const Vec3 dir{ce * std::cos(az), ce * std::sin(az), se};
      const auto hit = nearest_hit(scene, {0, 0, 0}, dir);
      if (!hit) continue;
      double t = hit->t;
      if (noise_sd > 0.0) {
        Rng stream = base.fork(static_cast<uint64_t>(b) * n_azimuth + a);
        t += noise_sd * stream.normal();
      }
      const Vec3 p = t * dir;
      positions.push_back(p);
      feats.insert(feats.end(), {p.x, p.y, p.z, 1.0});
    }
  }
  PointCloud cloud;
  const int64_t n = static_cast<int64_t>(positions.size());
  cloud.positions = std::move(positions);
  cloud.features = Tensor::from_data({n, 4}, std::move(feats));
  return cloud;
}

void class_color(int class_id, uint8_t rgb[3]) {
  static const uint8_t palette[8][3] = {
      {230, 60, 60}, {60, 200, 60},  {70, 90, 230},  {230, 200, 50},
      {200, 70, 200}, {60, 210, 210}, {240, 140, 40}, {160, 160, 160}};
  if (class_id <= 0) {
    rgb[0] = kBackgroundR;
    rgb[1] = kBackgroundG;
    rgb[2] = kBackgroundB;
    return;
  }
  const uint8_t* c = palette[(class_id - 1) % 8];
  rgb[0] = c[0];
  rgb[1] = c[1];
  rgb[2] = c[2];
}

Image render_image(const Scene& scene, const CameraModel& cam) {
  Image img = Image::filled(cam.width, cam.height, kBackgroundR, kBackgroundG,
                            kBackgroundB);
  const auto& k = cam.intrinsics.m;
  const Mat3 rt = cam.rotation.transposed();
  const Vec3 origin = cam.to_ego({0, 0, 0});
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double ry = (y + 0.5 - k[5]) / k[4];
      const double rx = (x + 0.5 - k[2] - k[1] * ry) / k[0];
      Vec3 dir = rt * Vec3{rx, ry, 1.0};
      const double len = norm(dir);
      dir = (1.0 / len) * dir;
      const auto hit = nearest_hit(scene, origin, dir);
      if (!hit) continue;
      uint8_t rgb[3];
      class_color(hit->class_id, rgb);
      const double shade = std::clamp(1.0 - hit->t / 40.0, 0.2, 1.0);
      uint8_t* px = img.pixel(x, y);
      for (int ch = 0; ch < 3; ++ch)
        px[ch] = static_cast<uint8_t>(std::lround(shade * rgb[ch]));
    }
  return img;
}

std::vector<Image> render_images(const Scene& scene,
                                 const std::vector<CameraModel>& cams) {
  std::vector<Image> out;
  out.reserve(cams.size());
  for (const auto& cam : cams) out.push_back(render_image(scene, cam));
  return out;
}

std::vector<CameraModel> toy_camera_rig(int n_cams) {
  if (n_cams <= 0) throw std::invalid_argument("camera rig needs at least one camera");
  std::vector<CameraModel> cams;
  const double spread = 70.0 * kPi / 180.0;
  for (int i = 0; i < n_cams; ++i) {
    const double yaw = (i - (n_cams - 1) / 2.0) * spread;
    CameraModel cam;
    const double c = std::cos(yaw), s = std::sin(yaw);
    // camera x right, y down, z forward; ego x forward, y left, z up
    cam.rotation.m[0] = s;  cam.rotation.m[1] = -c; cam.rotation.m[2] = 0;
    cam.rotation.m[3] = 0;  cam.rotation.m[4] = 0;  cam.rotation.m[5] = -1;
    cam.rotation.m[6] = c;  cam.rotation.m[7] = s;  cam.rotation.m[8] = 0;
    cam.translation = {0, 0, 0};
    cam.intrinsics.m[0] = 26.2;
    cam.intrinsics.m[2] = 24.0;
    cam.intrinsics.m[4] = 26.2;
    cam.intrinsics.m[5] = 16.0;
    cam.width = 48;
    cam.height = 32;
    cam.validate();
    cams.push_back(cam);
  }
  return cams;
}

Scene random_scene(uint64_t seed, const CartGridSpec& grid, int class_count) {
  if (class_count < 2)
    throw std::invalid_argument("random scene needs at least 2 classes");
  Rng rng(seed);
  Scene scene;
  scene.seed = seed;

  // Voxel-center plane along one axis: value = min + (i + 0.5) * step.
  auto plane_x = [&](int i) { return grid.x_min + (i + 0.5) * grid.dx(); };
  auto plane_y = [&](int i) { return grid.y_min + (i + 0.5) * grid.dy(); };
  auto plane_z = [&](int i) { return grid.z_min + (i + 0.5) * grid.dz(); };

  // Ground slab: class 1, from the grid floor up to a voxel-center plane.
  const int ground_top_idx = std::clamp(static_cast<int>(grid.nz * 0.15), 0, grid.nz - 2);
  const double ground_top = plane_z(ground_top_idx);
  SceneObject ground;
  ground.kind = ShapeKind::kGroundPlane;
  ground.class_id = 1;
  ground.center = {0.5 * (grid.x_min + grid.x_max), 0.5 * (grid.y_min + grid.y_max),
                   0.5 * (grid.z_min + ground_top)};
  ground.size = {grid.x_max - grid.x_min, grid.y_max - grid.y_min,
                 ground_top - grid.z_min};
  scene.objects.push_back(ground);

  const int n_boxes = static_cast<int>(rng.uniform_int(3, 5));
  for (int b = 0; b < n_boxes; ++b) {
    // Place inside the camera fan so every object is image-supervised.
    const double angle = rng.uniform(-1.1, 1.1);
    const double radius = rng.uniform(3.0, 8.0);
    const double want_x = radius * std::cos(angle);
    const double want_y = radius * std::sin(angle);
    const int mx = static_cast<int>(rng.uniform_int(2, 5));
    const int my = static_cast<int>(rng.uniform_int(2, 5));
    const int mz = static_cast<int>(rng.uniform_int(2, 4));

    auto snap = [](double want_lo, int slabs, double min, double step, int bins) {
      int i = static_cast<int>(std::lround((want_lo - min) / step - 0.5));
      i = std::clamp(i, 1, bins - 2 - slabs);
      return i;
    };
    const int ix = snap(want_x - mx * grid.dx() / 2, mx, grid.x_min, grid.dx(), grid.nx);
    const int iy = snap(want_y - my * grid.dy() / 2, my, grid.y_min, grid.dy(), grid.ny);
    const double x_lo = plane_x(ix), x_hi = plane_x(ix + mx);
    const double y_lo = plane_y(iy), y_hi = plane_y(iy + my);
    const int top_idx = std::min(ground_top_idx + mz, grid.nz - 2);
    const double z_lo = ground_top, z_hi = plane_z(top_idx);

    SceneObject box;
    box.kind = ShapeKind::kBox;
    box.class_id = 2 + b % (class_count - 1);
    box.center = {0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi), 0.5 * (z_lo + z_hi)};
    box.size = {x_hi - x_lo, y_hi - y_lo, z_hi - z_lo};
    scene.objects.push_back(box);
  }
  scene.validate(grid, class_count);
  return scene;
}

}  // namespace cylocc
