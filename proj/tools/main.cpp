#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cylocc/checkpoint.hpp"
#include "cylocc/config.hpp"
#include "cylocc/formats.hpp"
#include "cylocc/gradcheck_suite.hpp"
#include "cylocc/metrics.hpp"
#include "cylocc/pipeline.hpp"
#include "cylocc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cylocc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key=value config file");
  cmd->add_option("--set", flags.overrides,
                  "config override key=value (repeatable, wins over the file)");
}

PipelineConfig resolve_config(const ConfigFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config_file.empty()) cfg = load_config(flags.config_file);
  for (const std::string& kv : flags.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> scene_dirs(const std::string& data_dir) {
  std::vector<std::string> dirs;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.is_directory()) dirs.push_back(entry.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw std::runtime_error("no scene directories under " + data_dir);
  return dirs;
}

int cmd_synth(const std::string& out_dir, int scenes, uint64_t seed,
              double noise_sd, int n_cams, const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  const std::vector<CameraModel> rig = toy_camera_rig(n_cams);
  Rng seeder(seed);
  for (int i = 0; i < scenes; ++i) {
    const Scene scene = random_scene(seeder.next_u64(), cfg.cart, cfg.classes);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d", i);
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir);
    save_scene(scene, (dir / "scene.txt").string());
    save_pointcloud(render_lidar(scene, 16, 90, noise_sd),
                    (dir / "lidar.ocpc").string());
    for (size_t c = 0; c < rig.size(); ++c)
      save_ppm(render_image(scene, rig[c]),
               (dir / ("cam" + std::to_string(c) + ".ppm")).string());
    save_occgrid(make_gt(scene, cfg.cart, cfg.classes),
                 (dir / "gt.ocgr").string());
  }
  std::cout << "wrote " << scenes << " scenes to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& ckpt_out,
              const std::string& log_path, int n_cams,
              const PipelineConfig& cfg) {
  std::vector<TrainSample> samples;
  for (const std::string& dir : scene_dirs(data_dir))
    samples.push_back(load_scene_dir(dir, n_cams));

  OccModel model(cfg, toy_camera_rig(n_cams));
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw std::runtime_error("cannot open log file " + log_path);
  }
  const std::vector<LossReport> reports =
      train(model, samples, cfg.steps, log.is_open() ? &log : nullptr);
  save_weights(model.graph, ckpt_out);
  if (!reports.empty())
    std::cout << "trained " << cfg.steps << " steps, total loss "
              << reports.front().total << " -> " << reports.back().total << "\n";
  std::cout << "checkpoint written to " << ckpt_out << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt, int n_cams,
             const PipelineConfig& cfg) {
  std::vector<TrainSample> samples;
  for (const std::string& dir : scene_dirs(data_dir))
    samples.push_back(load_scene_dir(dir, n_cams));
  OccModel model(cfg, toy_camera_rig(n_cams));
  if (!ckpt.empty()) load_weights(model.graph, ckpt);
  std::cout << metrics_json(evaluate(model, samples)) << "\n";
  return kExitOk;
}

int cmd_run(const std::string& scene_dir, const std::string& ckpt,
            const std::string& out_grid, int n_cams, const PipelineConfig& cfg) {
  const TrainSample sample = load_scene_dir(scene_dir, n_cams);
  OccModel model(cfg, toy_camera_rig(n_cams));
  if (!ckpt.empty()) load_weights(model.graph, ckpt);
  const PipelineResult res = run_pipeline(model, sample.images, sample.lidar);
  save_occgrid(res.occupancy, out_grid);
  std::cout << "occupancy grid written to " << out_grid << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera-LiDAR cylindrical occupancy pipeline"};
  app.require_subcommand(1);

  ConfigFlags synth_cfg, train_cfg, eval_cfg, run_cfg;
  int synth_scenes = 1;
  uint64_t synth_seed = 1;
  double synth_noise = 0.01;
  int n_cams = 2;
  std::string synth_out, train_data, train_ckpt = "weights.ocwt", train_log;
  std::string eval_data, eval_ckpt, run_scene, run_ckpt, run_out = "occ.ocgr";

  app.add_option("--cams", n_cams, "number of cameras in the rig")
      ->check(CLI::PositiveNumber);

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic scenes");
  synth->add_option("--scenes", synth_scenes, "number of scenes")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--noise", synth_noise, "lidar range noise std dev (m)");
  synth->add_option("--out", synth_out, "output directory")->required();
  add_config_flags(synth, synth_cfg);

  CLI::App* train_c = app.add_subcommand("train", "train on a scene directory");
  train_c->add_option("--data", train_data, "directory of scene subdirectories")
      ->required();
  train_c->add_option("--out", train_ckpt, "checkpoint output path");
  train_c->add_option("--log", train_log, "JSONL loss log path");
  add_config_flags(train_c, train_cfg);

  CLI::App* eval_c = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_c->add_option("--data", eval_data, "directory of scene subdirectories")
      ->required();
  eval_c->add_option("--ckpt", eval_ckpt, "checkpoint to load (optional)");
  add_config_flags(eval_c, eval_cfg);

  CLI::App* run_c = app.add_subcommand("run", "inference on one scene");
  run_c->add_option("--scene", run_scene, "scene directory")->required();
  run_c->add_option("--ckpt", run_ckpt, "checkpoint to load (optional)");
  run_c->add_option("--out", run_out, "output occupancy grid path");
  add_config_flags(run_c, run_cfg);

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference self-test");
  int gc_seeds = 5;
  gc->add_option("--seeds", gc_seeds, "seeds per check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_scenes, synth_seed, synth_noise, n_cams,
                       resolve_config(synth_cfg));
    if (train_c->parsed())
      return cmd_train(train_data, train_ckpt, train_log, n_cams,
                       resolve_config(train_cfg));
    if (eval_c->parsed())
      return cmd_eval(eval_data, eval_ckpt, n_cams, resolve_config(eval_cfg));
    if (run_c->parsed())
      return cmd_run(run_scene, run_ckpt, run_out, n_cams,
                     resolve_config(run_cfg));
    if (gc->parsed())
      return run_gradcheck_suite(std::cout, gc_seeds) == 0 ? kExitOk : kExitCheck;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
