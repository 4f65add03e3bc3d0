#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cylocc/formats.hpp"

namespace cylocc {

/// Per-class and binary-occupancy confusion counts; accumulates across scenes.
struct ConfusionStats {
  int classes = 0;                  // semantic classes, labels 1..classes
  std::vector<int64_t> tp, fp, fn;  // indexed by label, 0 = empty
  int64_t geo_tp = 0, geo_fp = 0, geo_fn = 0;

  explicit ConfusionStats(int class_count = 0)
      : classes(class_count),
        tp(static_cast<size_t>(class_count) + 1, 0),
        fp(static_cast<size_t>(class_count) + 1, 0),
        fn(static_cast<size_t>(class_count) + 1, 0) {}

  void add(const OccGrid& pred, const OccGrid& gt);
  void merge(const ConfusionStats& other);
};

/// TP/(TP+FP+FN), 0 when the denominator is 0.
double iou(const ConfusionStats& s, int c);

/// Unweighted mean IoU over semantic classes 1..classes (class 0 excluded);
/// absent classes count as 0.
double miou(const ConfusionStats& s);

/// Binary occupied-vs-empty IoU.
double geometric_iou(const ConfusionStats& s);

/// {"iou_geometric": ..., "miou": ..., "per_class": {"class_1": ...}}.
std::string metrics_json(const ConfusionStats& s);

}  // namespace cylocc
