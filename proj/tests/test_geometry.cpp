#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cylocc/geometry.hpp"
#include "cylocc/rng.hpp"
#include "oracles.hpp"

using namespace cylocc;

namespace {

constexpr double kPi = std::numbers::pi;

// Ego frame: x forward, y left, z up. Camera frame: x right, y down, z forward.
CameraModel test_camera(double yaw, Vec3 position = {}) {
  CameraModel cam;
  const double c = std::cos(yaw), s = std::sin(yaw);
  cam.rotation.m[0] = s;  cam.rotation.m[1] = -c; cam.rotation.m[2] = 0;
  cam.rotation.m[3] = 0;  cam.rotation.m[4] = 0;  cam.rotation.m[5] = -1;
  cam.rotation.m[6] = c;  cam.rotation.m[7] = s;  cam.rotation.m[8] = 0;
  cam.translation = -1.0 * (cam.rotation * position);
  cam.intrinsics.m[0] = 26.2;
  cam.intrinsics.m[2] = 24.0;
  cam.intrinsics.m[4] = 26.2;
  cam.intrinsics.m[5] = 16.0;
  cam.width = 48;
  cam.height = 32;
  cam.validate();
  return cam;
}

}  // namespace

TEST_CASE("cart_to_cyl fixed points") {
  Vec3 o = cart_to_cyl({0, 0, 0});
  CHECK(o.x == 0.0);
  CHECK(o.y == 0.0);
  CHECK(o.z == 0.0);

  Vec3 p = cart_to_cyl({3, 4, 1});
  CHECK(p.x == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(0.9272952180016122).epsilon(1e-12));
  CHECK(p.z == 1.0);

  Vec3 m = cart_to_cyl({-1, 0, 2});
  CHECK(m.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.y == -kPi);  // half-open interval picks -pi over +pi
  CHECK(m.z == 2.0);
}

TEST_CASE("cyl_to_cart fixed points") {
  Vec3 p = cyl_to_cart({1, kPi / 2, 0});
  CHECK(std::abs(p.x) < 1e-15);
  CHECK(p.y == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.z == 0.0);

  Vec3 d = cyl_to_cart({0, 2.34, 5});
  CHECK(d.x == 0.0);
  CHECK(d.y == 0.0);
  CHECK(d.z == 5.0);

  CHECK_THROWS_AS(cyl_to_cart({-0.1, 0, 0}), std::invalid_argument);
}

TEST_CASE("cart/cyl round-trip over 1e5 random points") {
  Rng rng(2024);
  double max_err = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double r = rng.uniform(1e-6, 60.0);
    const double theta = rng.uniform(-kPi, kPi);
    const double z = rng.uniform(-5.0, 3.0);
    const Vec3 cart = cyl_to_cart({r, theta, z});
    const Vec3 back = cart_to_cyl(cart);
    max_err = std::max(max_err, std::abs(back.x - r));
    max_err = std::max(max_err, std::abs(back.y - theta));
    max_err = std::max(max_err, std::abs(back.z - z));
    CHECK(back.y >= -kPi);
    CHECK(back.y < kPi);
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("azimuth bin index always lands in range") {
  CylGridSpec grid;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(-kPi, kPi);
    const int ia = grid.azimuth_bin(theta);
    CHECK(ia >= 0);
    CHECK(ia < grid.azimuth_bins);
  }
  CHECK(grid.azimuth_bin(-kPi) == 0);
  CHECK(grid.azimuth_bin(std::nextafter(kPi, 0.0)) == grid.azimuth_bins - 1);
}

TEST_CASE("rotating by whole bins shifts the azimuth bin index modulo A") {
  CylGridSpec grid;
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = rng.uniform(0.5, 10.0);
    const double theta = rng.uniform(-kPi, kPi);
    const Vec3 p = cyl_to_cart({r, theta, 0.0});
    const int base = grid.azimuth_bin(cart_to_cyl(p).y);
    for (int k : {1, grid.azimuth_bins / 4, grid.azimuth_bins / 2}) {
      const Vec3 q = Mat3::rot_z(k * grid.dtheta()) * p;
      const int shifted = grid.azimuth_bin(cart_to_cyl(q).y);
      CHECK(shifted == (base + k) % grid.azimuth_bins);
    }
  }
}

TEST_CASE("cylindrical binning uses half-open radial and height ranges") {
  CylGridSpec grid;
  grid.r_min = 1.0;
  grid.r_max = 5.0;
  grid.z_min = -1.0;
  grid.z_max = 1.0;
  grid.radial_bins = 8;
  grid.z_bins = 4;
  int ir, ia, iz;
  CHECK(grid.bin_of({1.0, 0.0, -1.0}, ir, ia, iz));
  CHECK(ir == 0);
  CHECK(iz == 0);
  CHECK_FALSE(grid.bin_of({5.0, 0.0, 0.0}, ir, ia, iz));
  CHECK_FALSE(grid.bin_of({0.999, 0.0, 0.0}, ir, ia, iz));
  CHECK_FALSE(grid.bin_of({2.0, 0.0, 1.0}, ir, ia, iz));
  CHECK(grid.bin_of({4.999, 0.0, 0.999}, ir, ia, iz));
  CHECK(ir == 7);
  CHECK(iz == 3);
}

TEST_CASE("point on the optical axis projects to the principal point") {
  const CameraModel cam = test_camera(0.0);
  const Projection p = project_to_image({10, 0, 0}, cam);
  CHECK(p.visible);
  CHECK(p.u == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(p.v == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(p.depth == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("points behind the camera are flagged invisible") {
  const CameraModel cam = test_camera(0.0);
  CHECK_FALSE(project_to_image({-5, 0, 0}, cam).visible);
  CHECK_FALSE(project_to_image({0.05, 0, 0}, cam).visible);  // inside near clip
}

TEST_CASE("projection matches the matrix oracle on 100 random points") {
  Rng rng(41);
  const CameraModel cam = test_camera(0.6, {0.2, -0.1, 0.3});
  int checked = 0;
  while (checked < 100) {
    const Vec3 p{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-3, 3)};
    const Projection got = project_to_image(p, cam);
    if (got.depth < 0.2) continue;  // oracle comparison needs a safe division
    const auto want = oracles::pinhole(p, cam);
    CHECK(std::abs(got.u - want[0]) < 1e-9);
    CHECK(std::abs(got.v - want[1]) < 1e-9);
    CHECK(std::abs(got.depth - want[2]) < 1e-9);
    const bool want_visible = want[2] > 0.1 && want[0] >= 0 && want[0] < cam.width &&
                              want[1] >= 0 && want[1] < cam.height;
    CHECK(got.visible == want_visible);
    ++checked;
  }
}

TEST_CASE("depth bins sit at centered camera-forward depths") {
  const CameraModel cam = test_camera(0.3, {0.1, 0.0, 0.2});
  SUBCASE("single bin at half the interval") {
    Tensor coords = depth_bin_coords(cam, 2, 3, 1, 2.0);
    REQUIRE(coords.shape() == Shape{1, 2, 3, 3});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j) {
        const Vec3 cyl{coords.at({0, i, j, 0}), coords.at({0, i, j, 1}),
                       coords.at({0, i, j, 2})};
        const Vec3 cam_pt = cam.to_camera(cyl_to_cart(cyl));
        CHECK(cam_pt.z == doctest::Approx(1.0).epsilon(1e-12));
      }
  }
  SUBCASE("farthest of 50 one-meter bins is at 49.5") {
    Tensor coords = depth_bin_coords(cam, 2, 2, 50, 1.0);
    double max_depth = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const Vec3 cyl{coords.at({49, i, j, 0}), coords.at({49, i, j, 1}),
                       coords.at({49, i, j, 2})};
        max_depth = std::max(max_depth, cam.to_camera(cyl_to_cart(cyl)).z);
      }
    CHECK(max_depth == doctest::Approx(49.5).epsilon(1e-12));
  }
  SUBCASE("bin coords reproject onto their own pixel center") {
    const int fh = 8, fw = 12, K = 12;
    Tensor coords = depth_bin_coords(cam, fh, fw, K, 1.0);
    const double sw = static_cast<double>(cam.width) / fw;
    const double sh = static_cast<double>(cam.height) / fh;
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < fh; ++i)
        for (int j = 0; j < fw; ++j) {
          const Vec3 cyl{coords.at({k, i, j, 0}), coords.at({k, i, j, 1}),
                         coords.at({k, i, j, 2})};
          const Projection p = project_to_image(cyl_to_cart(cyl), cam);
          CHECK(std::abs(p.u - (j + 0.5) * sw) < 1e-6);
          CHECK(std::abs(p.v - (i + 0.5) * sh) < 1e-6);
        }
  }
  CHECK_THROWS_AS(depth_bin_coords(cam, 2, 2, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(depth_bin_coords(cam, 2, 2, 4, -1.0), std::invalid_argument);
}

TEST_CASE("camera validation rejects bad models") {
  CameraModel cam = test_camera(0.0);
  cam.rotation.m[0] += 0.01;
  CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
  CameraModel cam2 = test_camera(0.0);
  cam2.intrinsics.m[0] = -1.0;
  CHECK_THROWS_AS(cam2.validate(), std::invalid_argument);
  CameraModel cam3 = test_camera(0.0);
  cam3.intrinsics.m[3] = 0.5;
  CHECK_THROWS_AS(cam3.validate(), std::invalid_argument);
}

TEST_CASE("grid spec validation") {
  CartGridSpec cart;
  cart.validate();
  cart.nx = 0;
  CHECK_THROWS_AS(cart.validate(), std::invalid_argument);
  CylGridSpec cyl;
  cyl.validate();
  cyl.r_min = -1.0;
  CHECK_THROWS_AS(cyl.validate(), std::invalid_argument);
}
