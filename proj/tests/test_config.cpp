#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "cylocc/config.hpp"

using namespace cylocc;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& text) {
    static int counter = 0;
    path = "t_config_" + std::to_string(counter++) + ".cfg";
    std::ofstream os(path);
    os << text;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("defaults pass validation") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.cyl.radial_bins % cfg.groups == 0);
  CHECK(cfg.channels == cfg.sem_channels);
}

TEST_CASE("every documented key lands in the right field") {
  PipelineConfig cfg;
  apply_config_entry(cfg, "cart.x_min", "-3.5");
  apply_config_entry(cfg, "cart.x_max", "3.5");
  apply_config_entry(cfg, "cart.y_min", "-2");
  apply_config_entry(cfg, "cart.y_max", "2");
  apply_config_entry(cfg, "cart.z_min", "-0.25");
  apply_config_entry(cfg, "cart.z_max", "1.75");
  apply_config_entry(cfg, "cart.nx", "16");
  apply_config_entry(cfg, "cart.ny", "16");
  apply_config_entry(cfg, "cart.nz", "8");
  apply_config_entry(cfg, "cyl.r_min", "0.1");
  apply_config_entry(cfg, "cyl.r_max", "4.5");
  apply_config_entry(cfg, "cyl.R", "24");
  apply_config_entry(cfg, "cyl.A", "40");
  apply_config_entry(cfg, "cyl.Z", "16");
  apply_config_entry(cfg, "depth.K", "10");
  apply_config_entry(cfg, "depth.d", "0.4");
  apply_config_entry(cfg, "fusion.M", "8");
  apply_config_entry(cfg, "channels.C", "12");
  apply_config_entry(cfg, "channels.C1", "5");
  apply_config_entry(cfg, "channels.C2", "12");
  apply_config_entry(cfg, "classes", "5");
  apply_config_entry(cfg, "loss.lambda", "2.5");
  apply_config_entry(cfg, "train.lr", "0.005");
  apply_config_entry(cfg, "train.momentum", "0.8");
  apply_config_entry(cfg, "train.steps", "50");
  apply_config_entry(cfg, "train.seed", "42");

  CHECK(cfg.cart.x_min == -3.5);
  CHECK(cfg.cart.x_max == 3.5);
  CHECK(cfg.cart.y_min == -2.0);
  CHECK(cfg.cart.y_max == 2.0);
  CHECK(cfg.cart.nx == 16);
  CHECK(cfg.cart.ny == 16);
  CHECK(cfg.cart.nz == 8);
  CHECK(cfg.cyl.r_min == 0.1);
  CHECK(cfg.cyl.r_max == 4.5);
  CHECK(cfg.cyl.radial_bins == 24);
  CHECK(cfg.cyl.azimuth_bins == 40);
  CHECK(cfg.cyl.z_bins == 16);
  CHECK(cfg.depth_bins == 10);
  CHECK(cfg.bin_depth == 0.4);
  CHECK(cfg.groups == 8);
  CHECK(cfg.channels == 12);
  CHECK(cfg.geo_channels == 5);
  CHECK(cfg.sem_channels == 12);
  CHECK(cfg.classes == 5);
  CHECK(cfg.lambda == 2.5);
  CHECK(cfg.lr == 0.005);
  CHECK(cfg.momentum == 0.8);
  CHECK(cfg.steps == 50);
  CHECK(cfg.seed == 42);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("cartesian z range drives the cylindrical z range") {
  PipelineConfig cfg;
  apply_config_entry(cfg, "cart.z_min", "-0.75");
  apply_config_entry(cfg, "cart.z_max", "2.25");
  CHECK(cfg.cart.z_min == -0.75);
  CHECK(cfg.cart.z_max == 2.25);
  CHECK(cfg.cyl.z_min == -0.75);
  CHECK(cfg.cyl.z_max == 2.25);
}

TEST_CASE("unknown keys and bad values are rejected with context") {
  PipelineConfig cfg;
  CHECK_THROWS_WITH(apply_config_entry(cfg, "cart.volume", "1"),
                    "config: unknown key 'cart.volume'");
  CHECK_THROWS_WITH(apply_config_entry(cfg, "cyl.r_max", "wide"),
                    "config: bad numeric value 'wide' for key cyl.r_max");
  CHECK_THROWS_WITH(apply_config_entry(cfg, "cyl.R", "many"),
                    "config: bad integer value 'many' for key cyl.R");
  CHECK_THROWS_WITH(apply_config_entry(cfg, "cyl.R", "12.5"),
                    "config: bad integer value '12.5' for key cyl.R");
}

TEST_CASE("validation rejects inconsistent settings") {
  SUBCASE("semantic channel width must match the shared width") {
    PipelineConfig cfg;
    cfg.sem_channels = cfg.channels + 1;
    CHECK_THROWS_WITH(cfg.validate(),
                      "config: channels.C2 must equal channels.C (semantic "
                      "features are sampled from the camera context)");
  }
  SUBCASE("cylinder axes must divide by the group count") {
    PipelineConfig cfg;
    cfg.cyl.radial_bins = 20;
    CHECK_THROWS_WITH(cfg.validate(),
                      "config: cyl.R (20) must be divisible by 8");
  }
  SUBCASE("cylinder axes must divide by the scale stack") {
    PipelineConfig cfg;
    cfg.groups = 1;
    cfg.cyl.azimuth_bins = 28;
    CHECK_THROWS_WITH(cfg.validate(),
                      "config: cyl.A (28) must be divisible by 8");
  }
  SUBCASE("training hyperparameters") {
    PipelineConfig cfg;
    cfg.momentum = 1.0;
    CHECK_THROWS_WITH(cfg.validate(), "config: bad training hyperparameters");
    cfg.momentum = 0.9;
    cfg.lr = -0.1;
    CHECK_THROWS_WITH(cfg.validate(), "config: bad training hyperparameters");
  }
  SUBCASE("empty ranges") {
    PipelineConfig cfg;
    cfg.cyl.r_min = 5.0;
    cfg.cyl.r_max = 5.0;
    CHECK_THROWS(cfg.validate());
  }
}

TEST_CASE("config files parse with comments and blank lines") {
  TempFile f(
      "# cylinder layout\n"
      "cyl.R = 24   # two groups of twelve? no, three of eight\n"
      "\n"
      "  cyl.A=48\n"
      "classes = 6\n"
      "train.lr = 0.02\n");
  PipelineConfig cfg = load_config(f.path, PipelineConfig{});
  CHECK(cfg.cyl.radial_bins == 24);
  CHECK(cfg.cyl.azimuth_bins == 48);
  CHECK(cfg.classes == 6);
  CHECK(cfg.lr == 0.02);
}

TEST_CASE("config file errors carry the file and line") {
  SUBCASE("missing file") {
    CHECK_THROWS_WITH(load_config("/nonexistent/dir/a.cfg", PipelineConfig{}),
                      "config file /nonexistent/dir/a.cfg: cannot open");
  }
  SUBCASE("missing equals sign") {
    TempFile f("cyl.R = 16\njust words\n");
    CHECK_THROWS_WITH(load_config(f.path, PipelineConfig{}),
                      (f.path + ":2: expected key=value, got 'just words'").c_str());
  }
  SUBCASE("bad value points at the offending line") {
    TempFile f("# header\n\ncyl.R = soon\n");
    CHECK_THROWS_WITH(
        load_config(f.path, PipelineConfig{}),
        (f.path + ":3: config: bad integer value 'soon' for key cyl.R").c_str());
  }
  SUBCASE("unknown key points at the offending line") {
    TempFile f("cyl.Q = 4\n");
    CHECK_THROWS_WITH(load_config(f.path, PipelineConfig{}),
                      (f.path + ":1: config: unknown key 'cyl.Q'").c_str());
  }
}
