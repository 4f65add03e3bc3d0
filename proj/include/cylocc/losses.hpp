#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cylocc/camera_branch.hpp"
#include "cylocc/formats.hpp"
#include "cylocc/tensor.hpp"

namespace cylocc {

/// Per-step loss breakdown. total is exactly
///   sum_l (1/2^l)(focal_l + lovasz_l + scal_geo_l + scal_sem_l) + lambda * depth_bce.
struct LossReport {
  static constexpr int kScales = 4;
  static constexpr std::array<double, kScales> kScaleWeights{1.0, 0.5, 0.25, 0.125};

  std::array<double, kScales> focal{}, lovasz{}, scal_geo{}, scal_sem{};
  double depth_bce = 0.0;
  double total = 0.0;
  double lambda = 3.0;
  bool depth_mask_empty = false;

  /// One JSON-lines record: step, focal_0..3, lovasz_0..3, scal_geo_0..3,
  /// scal_sem_0..3, depth_bce, total.
  std::string to_jsonl(int64_t step) const;
};

std::vector<int> grid_labels(const OccGrid& grid);

/// 4-level supervision pyramid. Each level halves every extent; a 2x2x2
/// block's label is its most frequent non-empty member (lowest label on
/// ties), empty only when all 8 are empty.
std::vector<OccGrid> gt_pyramid(const OccGrid& gt);

/// mean_i -(1 - p_t)^gamma * log(p_t) over all voxels, p_t the softmax
/// probability of the true class. gamma = 0 is plain cross-entropy.
Tensor focal_loss(Graph& g, const Tensor& logits, const std::vector<int>& labels,
                  int gamma = 2);

/// Lovasz extension of the Jaccard loss, averaged over the classes present
/// in labels. probs rows must be distributions.
Tensor lovasz_softmax_loss(Graph& g, const Tensor& probs,
                           const std::vector<int>& labels);

enum class ScalMode { kGeometric, kSemantic };

/// Scene-class affinity loss: -mean over present classes of
/// (log precision + log recall + log specificity)/3. Geometric mode scores
/// the single binary occupancy class with p_occ = 1 - probs(class 0).
/// Degenerate terms with an empty denominator set are skipped.
Tensor scal_loss(Graph& g, const Tensor& probs, const std::vector<int>& labels,
                 ScalMode mode);

/// Masked binary cross-entropy between the depth distribution and one-hot
/// targets, mean over supervised pixels and bins. Empty mask returns 0 and
/// sets *empty_mask.
Tensor depth_bce_loss(Graph& g, const Tensor& v_depth, const DepthTargets& dt,
                      bool* empty_mask = nullptr);

/// Assembles the full objective over exactly 4 scales of logits
/// (X_l x Y_l x Z_l x (Cls+1)) and ground truth. Fills `report` if given.
Tensor total_loss(Graph& g, const std::vector<Tensor>& scale_logits,
                  const std::vector<OccGrid>& gt_levels, const Tensor& v_depth,
                  const DepthTargets& dt, double lambda, LossReport* report);

}  // namespace cylocc
