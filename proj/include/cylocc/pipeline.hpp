#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cylocc/camera_branch.hpp"
#include "cylocc/config.hpp"
#include "cylocc/encoder_decoder.hpp"
#include "cylocc/formats.hpp"
#include "cylocc/lidar_branch.hpp"
#include "cylocc/losses.hpp"
#include "cylocc/metrics.hpp"
#include "cylocc/occupancy_head.hpp"
#include "cylocc/tpv_fusion.hpp"
#include "cylocc/voxelizer.hpp"

namespace cylocc {

/// All learnable components plus the graph that owns their parameters.
/// Parameter values are a pure function of cfg.seed.
struct OccModel {
  PipelineConfig cfg;
  std::vector<CameraModel> cams;
  Graph graph;
  CameraBranch camera;
  LidarBranch lidar;
  SpatialGroupPool cam_pool, lidar_pool;
  DynamicFusion fusion;
  PlaneEncoderDecoder refiner;
  OccupancyHead head;

  OccModel(const PipelineConfig& config, std::vector<CameraModel> cameras);
  OccModel(const OccModel&) = delete;
  OccModel& operator=(const OccModel&) = delete;
};

/// Every stage output, inspectable by tests.
struct PipelineIntermediates {
  std::vector<Tensor> features;   // per camera, 1 x C x H x W
  std::vector<Tensor> v_depth;    // per camera, 1 x K x H x W
  std::vector<Tensor> v_context;  // per camera, 1 x C x H x W
  Tensor v_depth_all;             // N_cam x K x H x W
  PointCloud pseudo_cloud;
  PointCloud lidar_features;
  CylVolume cam_volume, lidar_volume;
  TpvPlanes cam_planes, lidar_planes, fused_planes;
  MultiScalePlanes refined;
};

struct PipelineResult {
  std::vector<Tensor> logits;  // 4 scales, X_l x Y_l x Z_l x (Cls+1)
  OccGrid occupancy;           // argmax at scale 0
  PipelineIntermediates inter;
};

/// Full forward pass. Records onto model.graph (call graph.reset() between
/// passes). Module errors propagate wrapped with the failing stage's name.
PipelineResult run_pipeline(OccModel& model, const std::vector<Image>& images,
                            const PointCloud& lidar);

/// One scene's inputs and supervision.
struct TrainSample {
  std::vector<Image> images;
  PointCloud lidar;
  OccGrid gt;
};

/// Adam moment buffers, keyed by parameter name.
struct OptimizerState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  int64_t step = 0;
};

/// Forward, total loss, backward, Adam update (beta1 = train.momentum).
/// Throws (with the component breakdown) on a non-finite loss.
LossReport train_step(OccModel& model, const TrainSample& sample,
                      OptimizerState& state);

/// steps of round-robin training over the scenes; logs one JSONL record per
/// step when `log` is given.
std::vector<LossReport> train(OccModel& model,
                              const std::vector<TrainSample>& scenes, int steps,
                              std::ostream* log = nullptr);

/// Accumulated confusion over the scenes (forward passes only).
ConfusionStats evaluate(OccModel& model, const std::vector<TrainSample>& scenes);

/// Reads lidar.ocpc, cam{i}.ppm (i = 0.., as many as the model has cameras)
/// and gt.ocgr from a scene directory.
TrainSample load_scene_dir(const std::string& dir, int n_cams);

}  // namespace cylocc
