#include "cylocc/pipeline.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace cylocc {
namespace {

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

Rng model_rng(const PipelineConfig& cfg) { return Rng(cfg.seed); }

constexpr double kGradClipNorm = 25.0;

}  // namespace

OccModel::OccModel(const PipelineConfig& config, std::vector<CameraModel> cameras)
    : cfg([&] {
        config.validate();
        return config;
      }()),
      cams(std::move(cameras)),
      graph(),
      camera([&]() -> CameraBranch {
        Rng rng = model_rng(cfg);
        return CameraBranch(graph, "cam", cfg.channels, cfg.depth_bins,
                            cfg.bin_depth, rng, cfg.cyl.r_max);
      }()),
      lidar([&]() -> LidarBranch {
        Rng rng = model_rng(cfg).fork(1);
        return LidarBranch(graph, "lidar", 4, cfg.geo_channels,
                           cfg.sem_channels, cfg.channels, rng, cfg.cyl.r_max);
      }()),
      cam_pool([&]() -> SpatialGroupPool {
        Rng rng = model_rng(cfg).fork(2);
        return SpatialGroupPool(graph, "cam_pool", cfg.groups, cfg.channels, rng);
      }()),
      lidar_pool([&]() -> SpatialGroupPool {
        Rng rng = model_rng(cfg).fork(3);
        return SpatialGroupPool(graph, "lidar_pool", cfg.groups, cfg.channels, rng);
      }()),
      fusion([&]() -> DynamicFusion {
        Rng rng = model_rng(cfg).fork(4);
        return DynamicFusion(graph, "fuse", cfg.channels, rng);
      }()),
      refiner([&]() -> PlaneEncoderDecoder {
        Rng rng = model_rng(cfg).fork(5);
        return PlaneEncoderDecoder(graph, "refine", cfg.channels, rng);
      }()),
      head([&]() -> OccupancyHead {
        Rng rng = model_rng(cfg).fork(6);
        return OccupancyHead(graph, "head", cfg.channels, cfg.classes, rng);
      }()) {
  if (cams.empty())
    throw std::invalid_argument("pipeline: at least one camera required");
  for (const CameraModel& cam : cams) cam.validate();
}

PipelineResult run_pipeline(OccModel& model, const std::vector<Image>& images,
                            const PointCloud& lidar) {
  if (images.size() != model.cams.size())
    throw std::invalid_argument("pipeline: expected " +
                                std::to_string(model.cams.size()) +
                                " images, got " + std::to_string(images.size()));
  Graph& g = model.graph;
  PipelineResult res;
  PipelineIntermediates& it = res.inter;

  stage("camera backbone", [&] {
    for (const Image& img : images)
      it.features.push_back(
          model.camera.backbone(g, model.camera.image_to_tensor(img)));
  });
  stage("depth head", [&] {
    for (const Tensor& f : it.features)
      it.v_depth.push_back(model.camera.depth_distribution(g, f));
    it.v_depth_all = it.v_depth.size() == 1
                         ? it.v_depth[0]
                         : g.concat(it.v_depth, 0);
  });
  stage("context fusion", [&] {
    for (size_t n = 0; n < it.features.size(); ++n)
      it.v_context.push_back(model.camera.context(g, it.features[n],
                                                  it.v_depth[n], model.cams[n]));
  });
  stage("pseudo-cloud lift", [&] {
    std::vector<CameraLift> lifts;
    for (size_t n = 0; n < it.v_depth.size(); ++n)
      lifts.push_back({it.v_depth[n], it.v_context[n]});
    it.pseudo_cloud = lift_pseudo_cloud(g, model.cams, lifts,
                                        model.cfg.bin_depth);
  });
  stage("lidar branch", [&] {
    it.lidar_features = model.lidar.run(g, lidar, model.cams, it.v_context);
  });
  stage("voxelize", [&] {
    it.cam_volume = voxelize(g, it.pseudo_cloud, model.cfg.cyl);
    it.lidar_volume =
        it.lidar_features.size() == 0
            ? empty_volume(model.cfg.cyl, model.cfg.channels)
            : voxelize(g, it.lidar_features, model.cfg.cyl);
  });
  stage("group pooling", [&] {
    it.cam_planes = model.cam_pool.apply(g, it.cam_volume.features);
    it.lidar_planes = model.lidar_pool.apply(g, it.lidar_volume.features);
  });
  stage("dynamic fusion", [&] {
    it.fused_planes = model.fusion.fuse(g, it.cam_planes, it.lidar_planes);
  });
  stage("plane refinement", [&] {
    it.refined = refine_planes(g, model.refiner, it.fused_planes);
  });
  stage("occupancy head", [&] {
    res.logits = model.head.run(g, it.refined, model.cfg.cart, model.cfg.cyl);
    res.occupancy = decode_occupancy(res.logits[0], model.cfg.classes);
  });
  return res;
}

LossReport train_step(OccModel& model, const TrainSample& sample,
                      OptimizerState& state) {
  Graph& g = model.graph;
  g.reset();
  PipelineResult res = run_pipeline(model, sample.images, sample.lidar);

  LossReport report;
  Tensor loss;
  stage("loss", [&] {
    const int64_t feat_h = res.inter.v_depth_all.extent(2);
    const int64_t feat_w = res.inter.v_depth_all.extent(3);
    const DepthTargets dt = depth_targets(
        sample.lidar.positions, model.cams, static_cast<int>(feat_h),
        static_cast<int>(feat_w), model.cfg.depth_bins, model.cfg.bin_depth);
    const std::vector<OccGrid> pyramid = gt_pyramid(sample.gt);
    loss = total_loss(g, res.logits, pyramid, res.inter.v_depth_all, dt,
                      model.cfg.lambda, &report);
  });
  if (!std::isfinite(report.total))
    throw std::runtime_error("train step: non-finite loss: " +
                             report.to_jsonl(-1));

  g.backward(loss);

  // Per-sample log-loss gradients can spike by orders of magnitude when a
  // class probability saturates; clip the global norm so one bad scene
  // cannot blow up the moment estimates.
  double sq_norm = 0.0;
  for (const std::string& name : g.parameter_names()) {
    for (double gv : g.parameter(name).grad()) sq_norm += gv * gv;
  }
  const double norm = std::sqrt(sq_norm);
  const double scale = norm > kGradClipNorm ? kGradClipNorm / norm : 1.0;

  const double beta1 = model.cfg.momentum;
  const double beta2 = 0.999;
  const double eps = 1e-8;
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (const std::string& name : g.parameter_names()) {
    Tensor p = g.parameter(name);
    auto grad = p.grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(static_cast<size_t>(p.numel()), 0.0);
      v.assign(static_cast<size_t>(p.numel()), 0.0);
    }
    auto data = p.mutable_data();
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = scale * grad[i];
      const size_t s = static_cast<size_t>(i);
      m[s] = beta1 * m[s] + (1.0 - beta1) * gi;
      v[s] = beta2 * v[s] + (1.0 - beta2) * gi * gi;
      data[i] -= model.cfg.lr * (m[s] / bc1) / (std::sqrt(v[s] / bc2) + eps);
    }
  }
  return report;
}

std::vector<LossReport> train(OccModel& model,
                              const std::vector<TrainSample>& scenes, int steps,
                              std::ostream* log) {
  if (scenes.empty()) throw std::invalid_argument("train: no scenes");
  OptimizerState state;
  std::vector<LossReport> out;
  out.reserve(static_cast<size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    LossReport rep = train_step(model, scenes[static_cast<size_t>(s) % scenes.size()], state);
    if (log) *log << rep.to_jsonl(s) << "\n";
    out.push_back(rep);
  }
  return out;
}

ConfusionStats evaluate(OccModel& model, const std::vector<TrainSample>& scenes) {
  ConfusionStats stats(model.cfg.classes);
  for (const TrainSample& scene : scenes) {
    model.graph.reset();
    PipelineResult res = run_pipeline(model, scene.images, scene.lidar);
    stats.add(res.occupancy, scene.gt);
  }
  return stats;
}

TrainSample load_scene_dir(const std::string& dir, int n_cams) {
  TrainSample s;
  s.lidar = load_pointcloud(dir + "/lidar.ocpc");
  for (int i = 0; i < n_cams; ++i)
    s.images.push_back(load_ppm(dir + "/cam" + std::to_string(i) + ".ppm"));
  s.gt = load_occgrid(dir + "/gt.ocgr");
  return s;
}

}  // namespace cylocc
