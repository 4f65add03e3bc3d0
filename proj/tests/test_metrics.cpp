#include <doctest.h>
#include <json.hpp>

#include <cstdint>
#include <vector>

#include "cylocc/formats.hpp"
#include "cylocc/metrics.hpp"
#include "cylocc/rng.hpp"
#include "oracles.hpp"

using namespace cylocc;

namespace {

OccGrid random_grid(Rng& rng, int nx, int ny, int nz, int classes) {
  OccGrid g = OccGrid::empty(nx, ny, nz, classes);
  for (auto& l : g.labels)
    l = static_cast<uint8_t>(rng.uniform_int(0, classes));
  return g;
}

}  // namespace

TEST_CASE("perfect prediction scores 1 everywhere") {
  Rng rng(41);
  OccGrid gt = random_grid(rng, 4, 5, 3, 3);
  // Make sure every class shows up at least once.
  gt.labels[0] = 1;
  gt.labels[1] = 2;
  gt.labels[2] = 3;
  ConfusionStats s(3);
  s.add(gt, gt);
  for (int c = 1; c <= 3; ++c) CHECK(iou(s, c) == 1.0);
  CHECK(miou(s) == 1.0);
  CHECK(geometric_iou(s) == 1.0);
}

TEST_CASE("iou and miou from hand-filled counts") {
  ConfusionStats s(3);
  s.tp[1] = 3;
  s.fp[1] = 1;
  s.fn[1] = 2;
  CHECK(iou(s, 1) == doctest::Approx(0.5).epsilon(1e-15));

  s.tp[2] = 1;
  s.fp[2] = 3;  // 1 / 4 = 0.25
  // Class 3 never predicted or present: counts as 0.
  CHECK(iou(s, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(iou(s, 3) == 0.0);
  CHECK(miou(s) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("empty-vs-empty scene gives zero geometric iou, not NaN") {
  OccGrid empty = OccGrid::empty(3, 3, 3, 2);
  ConfusionStats s(2);
  s.add(empty, empty);
  CHECK(geometric_iou(s) == 0.0);
  CHECK(miou(s) == 0.0);
  CHECK(iou(s, 0) == 1.0);  // all empties agree
}

TEST_CASE("random grids match the counting oracle") {
  Rng rng(1234);
  const int classes = 4;
  ConfusionStats s(classes);
  oracles::IouCounts want;
  want.tp.assign(classes + 1, 0);
  want.fp.assign(classes + 1, 0);
  want.fn.assign(classes + 1, 0);
  int64_t geo_tp = 0, geo_fp = 0, geo_fn = 0;

  for (int pair = 0; pair < 20; ++pair) {
    OccGrid pred = random_grid(rng, 5, 4, 3, classes);
    OccGrid gt = random_grid(rng, 5, 4, 3, classes);
    s.add(pred, gt);
    const oracles::IouCounts c =
        oracles::iou_counts(pred.labels, gt.labels, classes + 1);
    for (int l = 0; l <= classes; ++l) {
      want.tp[l] += c.tp[l];
      want.fp[l] += c.fp[l];
      want.fn[l] += c.fn[l];
    }
    for (size_t i = 0; i < gt.labels.size(); ++i) {
      const bool po = pred.labels[i] > 0, to = gt.labels[i] > 0;
      if (po && to)
        ++geo_tp;
      else if (po)
        ++geo_fp;
      else if (to)
        ++geo_fn;
    }
  }

  for (int l = 0; l <= classes; ++l) {
    CHECK(s.tp[l] == want.tp[l]);
    CHECK(s.fp[l] == want.fp[l]);
    CHECK(s.fn[l] == want.fn[l]);
  }
  CHECK(s.geo_tp == geo_tp);
  CHECK(s.geo_fp == geo_fp);
  CHECK(s.geo_fn == geo_fn);

  double acc = 0.0;
  for (int l = 1; l <= classes; ++l) {
    const int64_t denom = want.tp[l] + want.fp[l] + want.fn[l];
    const double want_iou =
        denom == 0 ? 0.0 : static_cast<double>(want.tp[l]) / denom;
    CHECK(iou(s, l) == doctest::Approx(want_iou).epsilon(1e-15));
    acc += want_iou;
  }
  CHECK(miou(s) == doctest::Approx(acc / classes).epsilon(1e-15));
  CHECK(geometric_iou(s) ==
        doctest::Approx(static_cast<double>(geo_tp) /
                        static_cast<double>(geo_tp + geo_fp + geo_fn))
            .epsilon(1e-15));
}

TEST_CASE("merge accumulates like a single pass") {
  Rng rng(777);
  const int classes = 3;
  std::vector<OccGrid> preds, gts;
  for (int i = 0; i < 6; ++i) {
    preds.push_back(random_grid(rng, 4, 4, 2, classes));
    gts.push_back(random_grid(rng, 4, 4, 2, classes));
  }

  ConfusionStats all(classes);
  for (int i = 0; i < 6; ++i) all.add(preds[i], gts[i]);

  ConfusionStats a(classes), b(classes);
  for (int i = 0; i < 3; ++i) a.add(preds[i], gts[i]);
  for (int i = 3; i < 6; ++i) b.add(preds[i], gts[i]);
  a.merge(b);

  for (int l = 0; l <= classes; ++l) {
    CHECK(a.tp[l] == all.tp[l]);
    CHECK(a.fp[l] == all.fp[l]);
    CHECK(a.fn[l] == all.fn[l]);
  }
  CHECK(a.geo_tp == all.geo_tp);
  CHECK(a.geo_fp == all.geo_fp);
  CHECK(a.geo_fn == all.geo_fn);
}

TEST_CASE("metrics_json reports the computed values") {
  ConfusionStats s(2);
  s.tp[1] = 3;
  s.fp[1] = 1;
  s.fn[1] = 2;
  s.tp[2] = 1;
  s.fn[2] = 1;
  s.geo_tp = 4;
  s.geo_fp = 1;
  s.geo_fn = 3;

  const std::string text = metrics_json(s);
  const nlohmann::json j = nlohmann::json::parse(text);
  CHECK(j["iou_geometric"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(j["miou"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(j["per_class"]["class_1"].get<double>() ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(j["per_class"]["class_2"].get<double>() ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(j["per_class"].size() == 2);
}

TEST_CASE("mismatched grids are rejected") {
  ConfusionStats s(2);
  OccGrid a = OccGrid::empty(2, 2, 2, 2);
  OccGrid b = OccGrid::empty(2, 2, 3, 2);
  CHECK_THROWS_WITH(s.add(a, b), "confusion: grid shape mismatch");

  OccGrid c = OccGrid::empty(2, 2, 2, 3);
  CHECK_THROWS_WITH(s.add(a, c), "confusion: class count mismatch");

  OccGrid d = OccGrid::empty(2, 2, 2, 3);
  ConfusionStats other(3);
  other.add(c, d);
  CHECK_THROWS_WITH(s.merge(other), "confusion: class count mismatch");
}
