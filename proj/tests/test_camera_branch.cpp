#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cylocc/camera_branch.hpp"
#include "cylocc/rng.hpp"
#include "cylocc/synthetic.hpp"
#include "oracles.hpp"

using namespace cylocc;

namespace {

Tensor random_image(Rng& rng, int h, int w) {
  std::vector<double> v(static_cast<size_t>(3) * h * w);
  for (auto& x : v) x = rng.next_double();
  return Tensor::from_data({1, 3, h, w}, std::move(v));
}

void fill_param(Graph& g, const std::string& name, double value) {
  auto d = g.parameter(name).mutable_data();
  std::fill(d.begin(), d.end(), value);
}

}  // namespace

TEST_CASE("backbone maps images to quarter-resolution features") {
  Graph g;
  Rng rng(1);
  CameraBranch cb(g, "cam", 6, 12, 1.0, rng, 14.2);
  Tensor img = random_image(rng, 32, 48);
  Tensor feat = cb.backbone(g, img);
  CHECK(feat.shape() == Shape{1, 6, 8, 12});
  for (double x : feat.data()) {
    CHECK(std::isfinite(x));
    CHECK(x >= 0.0);  // relu output
  }

  CHECK_THROWS_WITH_AS(cb.backbone(g, Tensor::zeros({1, 3, 30, 48})),
                       "backbone: image extents 30x48 must be divisible by 4",
                       std::invalid_argument);
  CHECK_THROWS_AS(cb.backbone(g, Tensor::zeros({1, 1, 32, 48})),
                  std::invalid_argument);
  CHECK_THROWS_AS(CameraBranch(g, "bad", 0, 12, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(CameraBranch(g, "bad", 6, 12, 1.0, rng, -1.0),
                  std::invalid_argument);
}

TEST_CASE("identical seeds build identical branches") {
  Tensor out[2];
  for (int trial = 0; trial < 2; ++trial) {
    Graph g;
    Rng rng(77);
    CameraBranch cb(g, "cam", 4, 8, 0.5, rng, 14.2);
    Rng img_rng(5);
    out[trial] = cb.depth_distribution(g, cb.backbone(g, random_image(img_rng, 16, 16)));
  }
  REQUIRE(out[0].shape() == out[1].shape());
  auto a = out[0].data(), b = out[1].data();
  for (int64_t i = 0; i < out[0].numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("depth distributions are per-pixel softmaxes over the bins") {
  Graph g;
  Rng rng(2);
  const int K = 5;
  CameraBranch cb(g, "cam", 4, K, 1.0, rng, 14.2);
  Tensor feat = cb.backbone(g, random_image(rng, 16, 32));
  Tensor vd = cb.depth_distribution(g, feat);
  CHECK(vd.shape() == Shape{1, K, 4, 8});

  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 8; ++j) {
      double sum = 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double p = vd.at({0, k, i, j});
        CHECK(p > 0.0);
        sum += p;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("a zeroed depth head predicts the uniform distribution") {
  Graph g;
  Rng rng(3);
  const int K = 4;
  CameraBranch cb(g, "cam", 4, K, 1.0, rng, 14.2);
  fill_param(g, "cam.depth.w", 0.0);
  Tensor vd = cb.depth_distribution(g, cb.backbone(g, random_image(rng, 16, 16)));
  for (double p : vd.data()) CHECK(p == doctest::Approx(1.0 / K).epsilon(1e-12));
}

TEST_CASE("zeroed context convs leave the features untouched") {
  Graph g;
  Rng rng(4);
  CameraBranch cb(g, "cam", 4, 6, 1.0, rng, 14.2);
  fill_param(g, "cam.ctx_depth.w", 0.0);
  fill_param(g, "cam.ctx_coord.w", 0.0);

  const CameraModel cam = toy_camera_rig(1)[0];
  Tensor feat = cb.backbone(g, random_image(rng, 32, 48));
  Tensor vd = cb.depth_distribution(g, feat);
  Tensor ctx = cb.context(g, feat, vd, cam);
  REQUIRE(ctx.shape() == feat.shape());
  auto c = ctx.data(), f = feat.data();
  for (int64_t i = 0; i < feat.numel(); ++i) CHECK(c[i] == f[i]);

  CHECK_THROWS_WITH_AS(cb.context(g, feat, Tensor::zeros({1, 6, 4, 4}), cam),
                       "context: feature / depth grid mismatch",
                       std::invalid_argument);
}

TEST_CASE("image_to_tensor is channel-major and scaled to [0,1]") {
  Graph g;
  Rng rng(5);
  CameraBranch cb(g, "cam", 4, 4, 1.0, rng);
  Image img = Image::filled(2, 2, 0, 0, 0);
  img.pixel(0, 0)[0] = 255;  // red at (x=0, y=0)
  img.pixel(1, 1)[2] = 51;   // blue at (x=1, y=1)
  Tensor t = cb.image_to_tensor(img);
  CHECK(t.shape() == Shape{1, 3, 2, 2});
  CHECK(t.at({0, 0, 0, 0}) == 1.0);
  CHECK(t.at({0, 2, 1, 1}) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(t.at({0, 1, 0, 1}) == 0.0);
}

TEST_CASE("lifting places one point per camera, bin and pixel") {
  Graph g;
  const CameraModel cam = toy_camera_rig(1)[0];
  const int K = 4, C = 3, H = 2, W = 2;
  const double d = 1.5;

  // One-hot depth on bin 2 everywhere.
  Tensor vd = Tensor::zeros({1, K, H, W});
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < W; ++j)
      vd.mutable_data()[(2 * H + i) * W + j] = 1.0;
  Rng rng(6);
  std::vector<double> cv(static_cast<size_t>(C) * H * W);
  for (auto& x : cv) x = rng.uniform(-1.0, 1.0);
  Tensor vc = Tensor::from_data({1, C, H, W}, std::move(cv));

  PointCloud cloud = lift_pseudo_cloud(g, {cam}, {{vd, vc}}, d);
  CHECK(cloud.size() == K * H * W);
  CHECK(cloud.features.shape() == Shape{K * H * W, C});

  // Point (k, i, j) sits at index (k*H + i)*W + j; only bin 2 carries features.
  for (int64_t k = 0; k < K; ++k)
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j < W; ++j)
        for (int64_t c = 0; c < C; ++c) {
          const double got = cloud.features.at({(k * H + i) * W + j, c});
          if (k == 2) {
            CHECK(got == vc.at({0, c, i, j}));
          } else {
            CHECK(got == 0.0);
          }
        }

  // Positions are the ego-frame bin centers: unproject the pixel center ray
  // to camera depth (k + 0.5) * d and map back to the ego frame.
  const double fx = cam.intrinsics.m[0], fy = cam.intrinsics.m[4];
  const double cx = cam.intrinsics.m[2], cy = cam.intrinsics.m[5];
  for (int64_t k = 0; k < K; ++k)
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j < W; ++j) {
        const double u = (j + 0.5) * cam.width / W;
        const double v = (i + 0.5) * cam.height / H;
        const double t = (k + 0.5) * d;
        const Vec3 want =
            cam.to_ego({(u - cx) / fx * t, (v - cy) / fy * t, t});
        const Vec3 got = cloud.positions[static_cast<size_t>((k * H + i) * W + j)];
        CHECK(norm(got - want) < 1e-9);
      }

  CHECK_THROWS_AS(lift_pseudo_cloud(g, {}, {}, d), std::invalid_argument);
  CHECK_THROWS_AS(lift_pseudo_cloud(g, {cam, cam}, {{vd, vc}}, d),
                  std::invalid_argument);
}

TEST_CASE("lifted features sum over bins to the context vector") {
  Graph g;
  const CameraModel cam = toy_camera_rig(1)[0];
  const int K = 6, C = 4, H = 2, W = 3;
  Rng rng(7);

  // Rows over k normalized to 1 like a real depth distribution.
  Tensor vd = Tensor::zeros({1, K, H, W});
  auto dv = vd.mutable_data();
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < W; ++j) {
      double sum = 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double r = rng.uniform(0.1, 1.0);
        dv[(k * H + i) * W + j] = r;
        sum += r;
      }
      for (int64_t k = 0; k < K; ++k) dv[(k * H + i) * W + j] /= sum;
    }
  std::vector<double> cv(static_cast<size_t>(C) * H * W);
  for (auto& x : cv) x = rng.uniform(-2.0, 2.0);
  Tensor vc = Tensor::from_data({1, C, H, W}, std::move(cv));

  PointCloud cloud = lift_pseudo_cloud(g, {cam}, {{vd, vc}}, 1.0);
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < W; ++j)
      for (int64_t c = 0; c < C; ++c) {
        double sum = 0.0;
        for (int64_t k = 0; k < K; ++k)
          sum += cloud.features.at({(k * H + i) * W + j, c});
        CHECK(sum == doctest::Approx(vc.at({0, c, i, j})).epsilon(1e-12));
      }
}

TEST_CASE("depth targets bin the nearest visible point per pixel") {
  const CameraModel cam = toy_camera_rig(1)[0];
  const int K = 12, feat_h = 8, feat_w = 12;
  const double d = 1.0;

  SUBCASE("a centered point lands in floor(depth/d)") {
    DepthTargets dt = depth_targets({{3.2, 0.0, 0.0}}, {cam}, feat_h, feat_w, K, d);
    CHECK(dt.supervised == 1);
    // Image center (24, 16), stride 4 -> cell (4, 6); depth 3.2 -> bin 3.
    CHECK(dt.mask[(4 * feat_w) + 6] == 1);
    CHECK(dt.one_hot.at({0, 3, 4, 6}) == 1.0);
    double total = 0.0;
    for (double x : dt.one_hot.data()) total += x;
    CHECK(total == 1.0);
  }

  SUBCASE("the nearest point on a ray wins") {
    DepthTargets dt = depth_targets({{7.9, 0.0, 0.0}, {2.1, 0.0, 0.0}}, {cam},
                                    feat_h, feat_w, K, d);
    CHECK(dt.supervised == 1);
    CHECK(dt.one_hot.at({0, 2, 4, 6}) == 1.0);
    CHECK(dt.one_hot.at({0, 7, 4, 6}) == 0.0);
  }

  SUBCASE("depths beyond the last bin clamp to K-1") {
    DepthTargets dt = depth_targets({{25.0, 0.0, 0.0}}, {cam}, feat_h, feat_w, K, d);
    CHECK(dt.one_hot.at({0, K - 1, 4, 6}) == 1.0);
  }

  SUBCASE("invisible points leave the mask empty") {
    DepthTargets dt = depth_targets({{-5.0, 0.0, 0.0}, {0.05, 0.0, 0.0}}, {cam},
                                    feat_h, feat_w, K, d);
    CHECK(dt.supervised == 0);
    for (uint8_t m : dt.mask) CHECK(m == 0);
    for (double x : dt.one_hot.data()) CHECK(x == 0.0);
  }

  SUBCASE("non-positive grid parameters are rejected") {
    CHECK_THROWS_AS(depth_targets({}, {cam}, 0, feat_w, K, d),
                    std::invalid_argument);
    CHECK_THROWS_AS(depth_targets({}, {cam}, feat_h, feat_w, K, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("random clouds match the brute-force depth target oracle") {
  const std::vector<CameraModel> cams = toy_camera_rig(2);
  const int K = 12, feat_h = 8, feat_w = 12;
  const double d = 1.0;

  Rng rng(8);
  std::vector<Vec3> pts(200);
  for (auto& p : pts)
    p = {rng.uniform(-2.0, 12.0), rng.uniform(-8.0, 8.0), rng.uniform(-2.0, 2.0)};

  DepthTargets dt = depth_targets(pts, cams, feat_h, feat_w, K, d);
  const auto want = oracles::depth_bins_oracle(pts, cams, feat_h, feat_w, K, d);

  int64_t supervised = 0;
  for (size_t n = 0; n < cams.size(); ++n)
    for (int i = 0; i < feat_h; ++i)
      for (int j = 0; j < feat_w; ++j) {
        const int bin = want[n][static_cast<size_t>(i) * feat_w + j];
        const size_t px = (n * feat_h + static_cast<size_t>(i)) * feat_w +
                          static_cast<size_t>(j);
        CHECK((dt.mask[px] != 0) == (bin >= 0));
        supervised += bin >= 0;
        for (int k = 0; k < K; ++k)
          CHECK(dt.one_hot.at({static_cast<int64_t>(n), k, i, j}) ==
                (k == bin ? 1.0 : 0.0));
      }
  CHECK(dt.supervised == supervised);
}
