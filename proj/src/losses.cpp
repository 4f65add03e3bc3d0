#include "cylocc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cylocc {
namespace {

constexpr double kLogFloor = 1e-12;

void check_labels(const Tensor& t, const std::vector<int>& labels) {
  if (t.rank() != 2)
    throw std::invalid_argument("loss: expected V x (classes+1) tensor");
  if (static_cast<int64_t>(labels.size()) != t.extent(0))
    throw std::invalid_argument("loss: label count " + std::to_string(labels.size()) +
                                " does not match voxel count " +
                                std::to_string(t.extent(0)));
  for (int l : labels)
    if (l < 0 || l >= t.extent(1))
      throw std::invalid_argument("loss: label " + std::to_string(l) +
                                  " out of range [0, " +
                                  std::to_string(t.extent(1) - 1) + "]");
}

std::vector<int> present_classes(const std::vector<int>& labels) {
  std::vector<int> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Tensor const_vec(const std::vector<double>& v) {
  return Tensor::from_data({static_cast<int64_t>(v.size())}, v);
}

/// Lovasz term for one class: errors e sorted descending, dotted with the
/// Jaccard-extension gradient of the sorted ground-truth mask.
Tensor lovasz_class(Graph& g, const Tensor& p_col, const std::vector<double>& mask) {
  const int64_t v = p_col.extent(0);
  std::vector<double> coef(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) coef[i] = 1.0 - 2.0 * mask[i];
  Tensor e = g.add(const_vec(mask), g.mul(const_vec(coef), p_col));

  std::vector<int64_t> order(static_cast<size_t>(v));
  std::iota(order.begin(), order.end(), 0);
  auto ev = e.data();
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return ev[a] > ev[b]; });
  Tensor e_sorted = g.gather(e, 0, order);

  double gts = 0.0;
  for (double m : mask) gts += m;
  std::vector<double> grad(static_cast<size_t>(v));
  double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0;
  for (int64_t i = 0; i < v; ++i) {
    const double m = mask[static_cast<size_t>(order[static_cast<size_t>(i)])];
    cum_fg += m;
    cum_bg += 1.0 - m;
    const double jacc = 1.0 - (gts - cum_fg) / (gts + cum_bg);
    grad[static_cast<size_t>(i)] = jacc - prev;
    prev = jacc;
  }
  return g.sum_all(g.mul(const_vec(grad), e_sorted));
}

/// -(log P + log R + log S)/n_defined for one class given its probability
/// column and 0/1 membership mask; the log of each ratio is computed as a
/// difference of floored logs (the op set has no division).
Tensor scal_class(Graph& g, const Tensor& p_col, const std::vector<double>& mask) {
  const int64_t v = p_col.extent(0);
  std::vector<double> inv(mask.size());
  double n_in = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    inv[i] = 1.0 - mask[i];
    n_in += mask[i];
  }
  const double n_out = static_cast<double>(v) - n_in;

  Tensor sum_p = g.sum_all(p_col);
  Tensor sum_tp = g.sum_all(g.mul(const_vec(mask), p_col));
  Tensor log_tp = g.log(sum_tp, kLogFloor);

  Tensor acc = g.sub(log_tp, g.log(sum_p, kLogFloor));  // log precision
  int terms = 1;
  if (n_in > 0.0) {
    acc = g.add(acc, g.sub(log_tp, Tensor::scalar(std::log(n_in))));  // log recall
    ++terms;
  }
  if (n_out > 0.0) {
    Tensor one = Tensor::full({v}, 1.0);
    Tensor sum_tn = g.sum_all(g.mul(const_vec(inv), g.sub(one, p_col)));
    acc = g.add(acc, g.sub(g.log(sum_tn, kLogFloor),
                           Tensor::scalar(std::log(n_out))));  // log specificity
    ++terms;
  }
  return g.scalar_mul(acc, -1.0 / terms);
}

Tensor class_column(Graph& g, const Tensor& probs, int c) {
  return g.reshape(g.slice(probs, {0, c}, {probs.extent(0), 1}),
                   {probs.extent(0)});
}

}  // namespace

std::string LossReport::to_jsonl(int64_t step) const {
  nlohmann::ordered_json j;
  j["step"] = step;
  for (int l = 0; l < kScales; ++l) j["focal_" + std::to_string(l)] = focal[static_cast<size_t>(l)];
  for (int l = 0; l < kScales; ++l) j["lovasz_" + std::to_string(l)] = lovasz[static_cast<size_t>(l)];
  for (int l = 0; l < kScales; ++l) j["scal_geo_" + std::to_string(l)] = scal_geo[static_cast<size_t>(l)];
  for (int l = 0; l < kScales; ++l) j["scal_sem_" + std::to_string(l)] = scal_sem[static_cast<size_t>(l)];
  j["depth_bce"] = depth_bce;
  j["total"] = total;
  return j.dump();
}

std::vector<int> grid_labels(const OccGrid& grid) {
  return std::vector<int>(grid.labels.begin(), grid.labels.end());
}

std::vector<OccGrid> gt_pyramid(const OccGrid& gt) {
  gt.validate();
  std::vector<OccGrid> out;
  out.push_back(gt);
  for (int l = 1; l < LossReport::kScales; ++l) {
    const OccGrid& prev = out.back();
    if (prev.nx % 2 != 0 || prev.ny % 2 != 0 || prev.nz % 2 != 0)
      throw std::invalid_argument("gt_pyramid: grid " + std::to_string(prev.nx) +
                                  "x" + std::to_string(prev.ny) + "x" +
                                  std::to_string(prev.nz) +
                                  " not halvable at level " + std::to_string(l));
    OccGrid next;
    next.nx = prev.nx / 2;
    next.ny = prev.ny / 2;
    next.nz = prev.nz / 2;
    next.class_count = prev.class_count;
    next.labels.resize(static_cast<size_t>(next.nx) * next.ny * next.nz);
    std::vector<int> counts(static_cast<size_t>(prev.class_count) + 1);
    for (int ix = 0; ix < next.nx; ++ix)
      for (int iy = 0; iy < next.ny; ++iy)
        for (int iz = 0; iz < next.nz; ++iz) {
          std::fill(counts.begin(), counts.end(), 0);
          for (int dx = 0; dx < 2; ++dx)
            for (int dy = 0; dy < 2; ++dy)
              for (int dz = 0; dz < 2; ++dz)
                ++counts[prev.at(2 * ix + dx, 2 * iy + dy, 2 * iz + dz)];
          int best = 0;
          for (int c = 1; c <= prev.class_count; ++c)
            if (counts[static_cast<size_t>(c)] > (best == 0 ? 0 : counts[static_cast<size_t>(best)]))
              best = c;
          next.labels[(static_cast<size_t>(ix) * next.ny + iy) * next.nz + iz] =
              static_cast<uint8_t>(best);
        }
    out.push_back(std::move(next));
  }
  return out;
}

Tensor focal_loss(Graph& g, const Tensor& logits, const std::vector<int>& labels,
                  int gamma) {
  check_labels(logits, labels);
  if (gamma < 0) throw std::invalid_argument("focal_loss: negative gamma");
  const int64_t v = logits.extent(0), w = logits.extent(1);
  Tensor probs = g.softmax(logits, 1);
  std::vector<int64_t> idx(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    idx[i] = static_cast<int64_t>(i) * w + labels[i];
  Tensor p_t = g.gather(g.reshape(probs, {v * w}), 0, idx);
  Tensor log_p = g.log(p_t, kLogFloor);
  if (gamma > 0) {
    Tensor miss = g.sub(Tensor::full({v}, 1.0), p_t);
    Tensor weight = miss;
    for (int i = 1; i < gamma; ++i) weight = g.mul(weight, miss);
    log_p = g.mul(weight, log_p);
  }
  return g.scalar_mul(g.mean_all(log_p), -1.0);
}

Tensor lovasz_softmax_loss(Graph& g, const Tensor& probs,
                           const std::vector<int>& labels) {
  check_labels(probs, labels);
  const std::vector<int> classes = present_classes(labels);
  Tensor acc;
  for (int c : classes) {
    std::vector<double> mask(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == c ? 1.0 : 0.0;
    Tensor term = lovasz_class(g, class_column(g, probs, c), mask);
    acc = acc.defined() ? g.add(acc, term) : term;
  }
  return g.scalar_mul(acc, 1.0 / static_cast<double>(classes.size()));
}

Tensor scal_loss(Graph& g, const Tensor& probs, const std::vector<int>& labels,
                 ScalMode mode) {
  check_labels(probs, labels);
  const int64_t v = probs.extent(0);
  if (mode == ScalMode::kGeometric) {
    std::vector<double> occ(labels.size());
    bool any = false;
    for (size_t i = 0; i < labels.size(); ++i) {
      occ[i] = labels[i] > 0 ? 1.0 : 0.0;
      any = any || labels[i] > 0;
    }
    if (!any) return Tensor::scalar(0.0);
    Tensor p_occ = g.sub(Tensor::full({v}, 1.0), class_column(g, probs, 0));
    return scal_class(g, p_occ, occ);
  }
  const std::vector<int> classes = present_classes(labels);
  Tensor acc;
  for (int c : classes) {
    std::vector<double> mask(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == c ? 1.0 : 0.0;
    Tensor term = scal_class(g, class_column(g, probs, c), mask);
    acc = acc.defined() ? g.add(acc, term) : term;
  }
  return g.scalar_mul(acc, 1.0 / static_cast<double>(classes.size()));
}

Tensor depth_bce_loss(Graph& g, const Tensor& v_depth, const DepthTargets& dt,
                      bool* empty_mask) {
  if (v_depth.rank() != 4)
    throw std::invalid_argument("depth_bce: expected N x K x H x W");
  if (v_depth.shape() != dt.one_hot.shape())
    throw std::invalid_argument("depth_bce: distribution / target shape mismatch");
  if (empty_mask) *empty_mask = dt.supervised == 0;
  if (dt.supervised == 0) return Tensor::scalar(0.0);

  const int64_t n = v_depth.extent(0), k = v_depth.extent(1);
  const int64_t h = v_depth.extent(2), w = v_depth.extent(3);
  Tensor mask = Tensor::zeros({n, 1, h, w});
  auto mv = mask.mutable_data();
  for (size_t i = 0; i < dt.mask.size(); ++i) mv[static_cast<int64_t>(i)] = dt.mask[i];

  Tensor one = Tensor::full(v_depth.shape(), 1.0);
  Tensor inv_t = Tensor::full(v_depth.shape(), 1.0);
  {
    auto iv = inv_t.mutable_data();
    auto tv = dt.one_hot.data();
    for (int64_t i = 0; i < inv_t.numel(); ++i) iv[i] = 1.0 - tv[i];
  }
  Tensor ll = g.add(g.mul(dt.one_hot, g.log(v_depth, kLogFloor)),
                    g.mul(inv_t, g.log(g.sub(one, v_depth), kLogFloor)));
  Tensor masked = g.mul(ll, g.broadcast(mask, v_depth.shape()));
  return g.scalar_mul(g.sum_all(masked),
                      -1.0 / static_cast<double>(dt.supervised * k));
}

Tensor total_loss(Graph& g, const std::vector<Tensor>& scale_logits,
                  const std::vector<OccGrid>& gt_levels, const Tensor& v_depth,
                  const DepthTargets& dt, double lambda, LossReport* report) {
  if (scale_logits.size() != LossReport::kScales ||
      gt_levels.size() != LossReport::kScales)
    throw std::invalid_argument("total_loss: expected exactly " +
                                std::to_string(LossReport::kScales) +
                                " scales, got " +
                                std::to_string(scale_logits.size()) + " logits / " +
                                std::to_string(gt_levels.size()) + " ground truths");
  LossReport rep;
  rep.lambda = lambda;
  Tensor acc;
  for (size_t l = 0; l < scale_logits.size(); ++l) {
    const Tensor& logits = scale_logits[l];
    const OccGrid& gt = gt_levels[l];
    if (logits.rank() != 4 || logits.extent(0) != gt.nx ||
        logits.extent(1) != gt.ny || logits.extent(2) != gt.nz)
      throw std::invalid_argument("total_loss: scale " + std::to_string(l) +
                                  " logits do not match ground-truth grid");
    const std::vector<int> labels = grid_labels(gt);
    Tensor flat = g.reshape(logits, {logits.numel() / logits.extent(3),
                                     logits.extent(3)});
    Tensor probs = g.softmax(flat, 1);
    Tensor f = focal_loss(g, flat, labels);
    Tensor lv = lovasz_softmax_loss(g, probs, labels);
    Tensor sg = scal_loss(g, probs, labels, ScalMode::kGeometric);
    Tensor ss = scal_loss(g, probs, labels, ScalMode::kSemantic);
    rep.focal[l] = f.item();
    rep.lovasz[l] = lv.item();
    rep.scal_geo[l] = sg.item();
    rep.scal_sem[l] = ss.item();
    Tensor scale_sum = g.add(g.add(f, lv), g.add(sg, ss));
    Tensor weighted = g.scalar_mul(scale_sum, LossReport::kScaleWeights[l]);
    acc = acc.defined() ? g.add(acc, weighted) : weighted;
  }
  Tensor depth = depth_bce_loss(g, v_depth, dt, &rep.depth_mask_empty);
  rep.depth_bce = depth.item();
  Tensor total = g.add(acc, g.scalar_mul(depth, lambda));
  rep.total = total.item();
  if (report) *report = rep;
  return total;
}

}  // namespace cylocc
