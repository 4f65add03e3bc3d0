#include "cylocc/metrics.hpp"

#include <stdexcept>

#include <json.hpp>

namespace cylocc {

void ConfusionStats::add(const OccGrid& pred, const OccGrid& gt) {
  if (pred.nx != gt.nx || pred.ny != gt.ny || pred.nz != gt.nz)
    throw std::invalid_argument("confusion: grid shape mismatch");
  if (pred.class_count != gt.class_count || pred.class_count != classes)
    throw std::invalid_argument("confusion: class count mismatch");
  for (size_t i = 0; i < gt.labels.size(); ++i) {
    const uint8_t p = pred.labels[i], t = gt.labels[i];
    if (p == t) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
    const bool po = p > 0, to = t > 0;
    if (po && to)
      ++geo_tp;
    else if (po)
      ++geo_fp;
    else if (to)
      ++geo_fn;
  }
}

void ConfusionStats::merge(const ConfusionStats& other) {
  if (other.classes != classes)
    throw std::invalid_argument("confusion: class count mismatch");
  for (size_t c = 0; c < tp.size(); ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
  }
  geo_tp += other.geo_tp;
  geo_fp += other.geo_fp;
  geo_fn += other.geo_fn;
}

double iou(const ConfusionStats& s, int c) {
  const int64_t denom = s.tp[static_cast<size_t>(c)] + s.fp[static_cast<size_t>(c)] +
                        s.fn[static_cast<size_t>(c)];
  if (denom == 0) return 0.0;
  return static_cast<double>(s.tp[static_cast<size_t>(c)]) /
         static_cast<double>(denom);
}

double miou(const ConfusionStats& s) {
  if (s.classes == 0) return 0.0;
  double acc = 0.0;
  for (int c = 1; c <= s.classes; ++c) acc += iou(s, c);
  return acc / s.classes;
}

double geometric_iou(const ConfusionStats& s) {
  const int64_t denom = s.geo_tp + s.geo_fp + s.geo_fn;
  if (denom == 0) return 0.0;
  return static_cast<double>(s.geo_tp) / static_cast<double>(denom);
}

std::string metrics_json(const ConfusionStats& s) {
  nlohmann::ordered_json j;
  j["iou_geometric"] = geometric_iou(s);
  j["miou"] = miou(s);
  nlohmann::ordered_json per;
  for (int c = 1; c <= s.classes; ++c)
    per["class_" + std::to_string(c)] = iou(s, c);
  j["per_class"] = per;
  return j.dump();
}

}  // namespace cylocc
