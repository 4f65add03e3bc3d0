#include "cylocc/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cylocc/camera_branch.hpp"
#include "cylocc/config.hpp"
#include "cylocc/encoder_decoder.hpp"
#include "cylocc/lidar_branch.hpp"
#include "cylocc/losses.hpp"
#include "cylocc/occupancy_head.hpp"
#include "cylocc/pipeline.hpp"
#include "cylocc/synthetic.hpp"
#include "cylocc/tpv_fusion.hpp"
#include "cylocc/voxelizer.hpp"

namespace cylocc {
namespace {

Tensor rand_tensor(Rng& rng, const Shape& shape, double lo, double hi,
                   bool grad = true) {
  Tensor t = Tensor::zeros(shape, grad);
  auto v = t.mutable_data();
  for (double& x : v) x = rng.uniform(lo, hi);
  return t;
}

/// Fixed-weight scalarizer so multi-output stages reduce to a scalar without
/// flattening the gradient structure.
Tensor weighted_sum(Graph& g, const Tensor& t, uint64_t salt) {
  Rng rng(0xabcdef01u + salt);
  Tensor w = rand_tensor(rng, t.shape(), -1.0, 1.0, false);
  return g.sum_all(g.mul(t, w));
}

class Suite {
 public:
  Suite(std::ostream& out, int seeds) : out_(out), seeds_(seeds) {}

  int failures() const { return failures_; }

  void check(const std::string& label, double tol,
             const std::function<GradcheckReport(Graph&, Rng&)>& build) {
    double worst = 0.0;
    bool ok = true;
    for (int s = 0; s < seeds_; ++s) {
      Graph g;
      Rng rng(1000003ULL * static_cast<uint64_t>(s + 1));
      GradcheckReport rep = build(g, rng);
      for (const GradcheckEntry& e : rep.entries) {
        worst = std::max(worst, e.max_rel_err);
        ok = ok && e.max_rel_err < tol;
      }
    }
    out_ << (ok ? "pass" : "FAIL") << "  " << label << "  max rel err "
         << worst << "\n";
    if (!ok) ++failures_;
  }

 private:
  std::ostream& out_;
  int seeds_;
  int failures_ = 0;
};

void op_checks(Suite& s) {
  auto unary = [](const char* name, auto op, double lo, double hi) {
    return [name, op, lo, hi](Graph& g, Rng& rng) {
      Tensor x = rand_tensor(rng, {3, 4}, lo, hi);
      return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
        return weighted_sum(gg, op(gg, in[0]), 7);
      }, {x}, {name});
    };
  };
  s.check("op add", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1), b = rand_tensor(rng, {2, 3}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.add(in[0], in[1]), 1);
    }, {a, b}, {"a", "b"});
  });
  s.check("op sub", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1), b = rand_tensor(rng, {2, 3}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.sub(in[0], in[1]), 2);
    }, {a, b}, {"a", "b"});
  });
  s.check("op mul", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1), b = rand_tensor(rng, {2, 3}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.mul(in[0], in[1]), 3);
    }, {a, b}, {"a", "b"});
  });
  s.check("op scalar_mul", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.scalar_mul(in[0], -1.7), 4);
    }, {a}, {"a"});
  });
  s.check("op matmul", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {3, 4}, -1, 1), b = rand_tensor(rng, {4, 2}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.matmul(in[0], in[1]), 5);
    }, {a, b}, {"a", "b"});
  });
  s.check("op linear", 1e-4, [](Graph& g, Rng& rng) {
    Tensor x = rand_tensor(rng, {3, 4}, -1, 1), w = rand_tensor(rng, {4, 2}, -1, 1);
    Tensor b = rand_tensor(rng, {2}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.linear(in[0], in[1], in[2]), 6);
    }, {x, w, b}, {"x", "w", "b"});
  });
  s.check("op conv2d zero-pad stride 1", 1e-4, [](Graph& g, Rng& rng) {
    Tensor x = rand_tensor(rng, {1, 2, 5, 6}, -1, 1);
    Tensor w = rand_tensor(rng, {3, 2, 3, 3}, -1, 1);
    Tensor b = rand_tensor(rng, {3}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.conv2d(in[0], in[1], in[2],
                                        {.stride = 1, .pad_h = 1, .pad_w = 1}), 8);
    }, {x, w, b}, {"x", "w", "b"});
  });
  s.check("op conv2d circular stride 2", 1e-4, [](Graph& g, Rng& rng) {
    Tensor x = rand_tensor(rng, {1, 2, 4, 6}, -1, 1);
    Tensor w = rand_tensor(rng, {2, 2, 3, 3}, -1, 1);
    Tensor b = rand_tensor(rng, {2}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      Conv2dSpec spec{.stride = 2, .pad_h = 1, .pad_w = 1,
                      .mode_w = PadMode::kCircular};
      return weighted_sum(gg, gg.conv2d(in[0], in[1], in[2], spec), 9);
    }, {x, w, b}, {"x", "w", "b"});
  });
  s.check("op relu", 1e-4, [](Graph& g, Rng& rng) {
    Tensor x = rand_tensor(rng, {3, 4}, 0.2, 1.0);
    auto v = x.mutable_data();
    for (size_t i = 0; i < v.size(); i += 2) v[i] = -v[i];  // keep off the kink
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.relu(in[0]), 10);
    }, {x}, {"x"});
  });
  s.check("op softplus", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.softplus(t);
  }, -2.0, 2.0));
  s.check("op sigmoid", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.sigmoid(t);
  }, -2.0, 2.0));
  s.check("op softmax", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.softmax(t, 1);
  }, -2.0, 2.0));
  s.check("op log", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.log(t);
  }, 0.3, 3.0));
  s.check("op exp", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.exp(t);
  }, -1.5, 1.5));
  s.check("op max_reduce", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.max_reduce(t, 1);
  }, -2.0, 2.0));
  s.check("op mean_reduce", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.mean_reduce(t, 0);
  }, -2.0, 2.0));
  s.check("op mean_all", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.mean_all(t);
  }, -2.0, 2.0));
  s.check("op concat", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {2, 3}, -1, 1), b = rand_tensor(rng, {2, 2}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      const Tensor parts[] = {in[0], in[1]};
      return weighted_sum(gg, gg.concat(parts, 1), 11);
    }, {a, b}, {"a", "b"});
  });
  s.check("op slice", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.slice(t, {1, 1}, {2, 2});
  }, -2.0, 2.0));
  s.check("op reshape", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.reshape(t, {2, 6});
  }, -2.0, 2.0));
  s.check("op transpose", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.transpose(t, {1, 0});
  }, -2.0, 2.0));
  s.check("op gather", 1e-4, unary("x", [](Graph& gg, const Tensor& t) {
    return gg.gather(t, 0, {2, 0, 2, 1});
  }, -2.0, 2.0));
  s.check("op broadcast", 1e-4, [](Graph& g, Rng& rng) {
    Tensor a = rand_tensor(rng, {3, 1}, -1, 1);
    return gradcheck(g, [](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.broadcast(in[0], {3, 4}), 12);
    }, {a}, {"a"});
  });
  s.check("op bilinear_sample_2d clamp+wrap", 1e-4, [](Graph& g, Rng& rng) {
    Tensor plane = rand_tensor(rng, {4, 5, 3}, -1, 1);
    Tensor q = rand_tensor(rng, {6, 2}, -0.8, 5.3, false);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, gg.bilinear_sample_2d(in[0], q, BoundaryMode::kClamp,
                                                    BoundaryMode::kWrap), 13);
    }, {plane}, {"plane"});
  });
}

void loss_checks(Suite& s) {
  auto labels_of = [](Rng& rng, int64_t v, int classes) {
    std::vector<int> out(static_cast<size_t>(v));
    for (int& l : out) l = static_cast<int>(rng.uniform_int(0, classes));
    return out;
  };
  s.check("loss focal", 1e-4, [&](Graph& g, Rng& rng) {
    Tensor logits = rand_tensor(rng, {6, 3}, -1.5, 1.5);
    const std::vector<int> labels = labels_of(rng, 6, 2);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return focal_loss(gg, in[0], labels);
    }, {logits}, {"logits"});
  });
  s.check("loss lovasz", 1e-4, [&](Graph& g, Rng& rng) {
    Tensor logits = rand_tensor(rng, {6, 3}, -1.5, 1.5);
    const std::vector<int> labels = labels_of(rng, 6, 2);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return lovasz_softmax_loss(gg, gg.softmax(in[0], 1), labels);
    }, {logits}, {"logits"});
  });
  s.check("loss scal geo", 1e-4, [&](Graph& g, Rng& rng) {
    Tensor logits = rand_tensor(rng, {6, 3}, -1.5, 1.5);
    const std::vector<int> labels = labels_of(rng, 6, 2);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return scal_loss(gg, gg.softmax(in[0], 1), labels, ScalMode::kGeometric);
    }, {logits}, {"logits"});
  });
  s.check("loss scal sem", 1e-4, [&](Graph& g, Rng& rng) {
    Tensor logits = rand_tensor(rng, {4, 3}, -1.5, 1.5);
    const std::vector<int> labels = labels_of(rng, 4, 2);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return scal_loss(gg, gg.softmax(in[0], 1), labels, ScalMode::kSemantic);
    }, {logits}, {"logits"});
  });
  s.check("loss depth bce", 1e-4, [](Graph& g, Rng& rng) {
    Tensor logits = rand_tensor(rng, {1, 4, 2, 2}, -1.5, 1.5);
    DepthTargets dt;
    dt.one_hot = Tensor::zeros({1, 4, 2, 2});
    dt.mask = {1, 0, 1, 1};
    dt.supervised = 3;
    auto oh = dt.one_hot.mutable_data();
    oh[0 * 4 + 0] = 1.0;   // bin 0 at pixel 0
    oh[2 * 4 + 2] = 1.0;   // bin 2 at pixel 2
    oh[1 * 4 + 3] = 1.0;   // bin 1 at pixel 3
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return depth_bce_loss(gg, gg.softmax(in[0], 1), dt);
    }, {logits}, {"depth logits"});
  });
  // Small per-scale grids keep the Lovasz sort gaps far above the FD step
  // (the pyramid construction itself is covered by its own tests).
  s.check("loss total assembly", 1e-4, [&](Graph& g, Rng& rng) {
    std::vector<OccGrid> pyramid(4);
    std::vector<Tensor> logits;
    for (int l = 0; l < 4; ++l) {
      OccGrid& gt = pyramid[static_cast<size_t>(l)];
      gt.nx = gt.ny = gt.nz = 2;
      gt.class_count = 2;
      gt.labels.resize(8);
      for (auto& lbl : gt.labels)
        lbl = static_cast<uint8_t>(rng.uniform_int(0, 2));
      logits.push_back(rand_tensor(rng, {2, 2, 2, 3}, -1.0, 1.0));
    }
    Tensor depth_logits = rand_tensor(rng, {1, 4, 2, 2}, -1.0, 1.0);
    DepthTargets dt;
    dt.one_hot = Tensor::zeros({1, 4, 2, 2});
    dt.mask = {1, 1, 0, 0};
    dt.supervised = 2;
    auto oh = dt.one_hot.mutable_data();
    oh[0 * 4 + 0] = 1.0;
    oh[3 * 4 + 1] = 1.0;
    std::vector<Tensor> inputs = logits;
    inputs.push_back(depth_logits);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      std::vector<Tensor> sl(in.begin(), in.end() - 1);
      return total_loss(gg, sl, pyramid, gg.softmax(in.back(), 1), dt, 3.0,
                        nullptr);
    }, inputs, {"logits0", "logits1", "logits2", "logits3", "depth"});
  });
}

void stage_checks(Suite& s) {
  s.check("stage camera backbone", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    CameraBranch cam(g, "cam", 3, 4, 1.0, wr);
    Tensor img = rand_tensor(rng, {1, 3, 8, 8}, 0.0, 1.0);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, cam.backbone(gg, in[0]), 20);
    }, {img}, {"image"});
  });
  s.check("stage depth head", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    CameraBranch cam(g, "cam", 4, 4, 1.0, wr);
    Tensor feats = rand_tensor(rng, {1, 4, 2, 2}, -1.0, 1.0);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, cam.depth_distribution(gg, in[0]), 21);
    }, {feats}, {"features"});
  });
  s.check("stage context fusion", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    CameraBranch cam(g, "cam", 3, 4, 1.0, wr);
    const std::vector<CameraModel> rig = toy_camera_rig(1);
    Tensor feats = rand_tensor(rng, {1, 3, 8, 12}, -1.0, 1.0);
    Tensor vd = rand_tensor(rng, {1, 4, 8, 12}, 0.1, 0.9);
    Tensor w1 = g.parameter("cam.ctx_depth.w");
    Tensor w2 = g.parameter("cam.ctx_coord.w");
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, cam.context(gg, in[0], in[1], rig[0]), 22);
    }, {feats, vd, w1, w2}, {"V", "V_depth", "ctx w1", "ctx w2"});
  });
  s.check("stage pseudo-cloud lift", 1e-4, [](Graph& g, Rng& rng) {
    const std::vector<CameraModel> rig = toy_camera_rig(1);
    Tensor vd = rand_tensor(rng, {1, 3, 2, 2}, 0.1, 0.9);
    Tensor vc = rand_tensor(rng, {1, 2, 2, 2}, -1.0, 1.0);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      PointCloud pc = lift_pseudo_cloud(gg, rig, {{in[0], in[1]}}, 2.0);
      return weighted_sum(gg, pc.features, 23);
    }, {vd, vc}, {"V_depth", "V_context"});
  });
  s.check("stage lidar geometric mlp", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    LidarBranch lb(g, "lidar", 4, 3, 2, 3, wr);
    Tensor attrs = rand_tensor(rng, {5, 4}, -1.0, 1.0);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, lb.geometric_features(gg, in[0]), 24);
    }, {attrs}, {"attributes"});
  });
  s.check("stage lidar semantic sampling", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    LidarBranch lb(g, "lidar", 4, 3, 2, 3, wr);
    const std::vector<CameraModel> rig = toy_camera_rig(2);
    std::vector<Vec3> pts;
    for (int i = 0; i < 6; ++i)
      pts.push_back({rng.uniform(1.0, 6.0), rng.uniform(-2.0, 2.0),
                     rng.uniform(-1.0, 1.0)});
    std::vector<Tensor> planes = {rand_tensor(rng, {1, 2, 8, 12}, -1.0, 1.0),
                                  rand_tensor(rng, {1, 2, 8, 12}, -1.0, 1.0)};
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, lb.sample_semantic(gg, pts, rig, {in[0], in[1]}), 25);
    }, planes, {"plane cam0", "plane cam1"});
  });
  s.check("stage lidar feature fusion", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    LidarBranch lb(g, "lidar", 4, 3, 2, 3, wr);
    Tensor geo = rand_tensor(rng, {5, 3}, -1.0, 1.0);
    Tensor sem = rand_tensor(rng, {5, 2}, -1.0, 1.0);
    Tensor w = g.parameter("lidar.fuse1.w");
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, lb.fuse(gg, in[0], in[1]), 26);
    }, {geo, sem, w}, {"geo", "sem", "fuse w"});
  });
  s.check("stage voxelize", 1e-4, [](Graph& g, Rng& rng) {
    CylGridSpec spec{.r_min = 0.0, .r_max = 8.0, .radial_bins = 4,
                     .azimuth_bins = 4, .z_bins = 2, .z_min = -1.0, .z_max = 1.0};
    PointCloud pc;
    for (int i = 0; i < 8; ++i)
      pc.positions.push_back({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                              rng.uniform(-0.9, 0.9)});
    pc.features = rand_tensor(rng, {8, 2}, -1.0, 1.0);
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      PointCloud c;
      c.positions = pc.positions;
      c.features = in[0];
      return weighted_sum(gg, voxelize(gg, c, spec).features, 27);
    }, {pc.features}, {"point features"});
  });
  s.check("stage group pooling", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    SpatialGroupPool pool(g, "pool", 2, 2, wr);
    Tensor vol = rand_tensor(rng, {4, 4, 4, 2}, -1.0, 1.0);
    Tensor w = g.parameter("pool.rd.w");
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      TpvPlanes p = pool.apply(gg, in[0]);
      Tensor sum = gg.add(gg.add(weighted_sum(gg, p.f_rd, 28),
                                 weighted_sum(gg, p.f_dz, 29)),
                          weighted_sum(gg, p.f_zr, 30));
      return sum;
    }, {vol, w}, {"volume", "pool w"});
  });
  s.check("stage dynamic fusion", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    DynamicFusion df(g, "fuse", 2, wr);
    auto mk = [&](uint64_t) { return rand_tensor(rng, {4, 4, 2}, -1.0, 1.0); };
    TpvPlanes cam{mk(1), mk(2), mk(3)}, lid{mk(4), mk(5), mk(6)};
    Tensor w = g.parameter("fuse.rd.w");
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      TpvPlanes c{in[0], in[1], in[2]}, l{in[3], in[4], in[5]};
      TpvPlanes f = df.fuse(gg, c, l);
      return gg.add(gg.add(weighted_sum(gg, f.f_rd, 31),
                           weighted_sum(gg, f.f_dz, 32)),
                    weighted_sum(gg, f.f_zr, 33));
    }, {cam.f_rd, cam.f_dz, cam.f_zr, lid.f_rd, lid.f_dz, lid.f_zr, w},
       {"cam rd", "cam dz", "cam zr", "lidar rd", "lidar dz", "lidar zr", "gate w"});
  });
  s.check("stage plane encoder-decoder", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    PlaneEncoderDecoder net(g, "refine", 2, wr);
    Tensor plane = rand_tensor(rng, {8, 8, 2}, -1.0, 1.0);
    Tensor w = g.parameter("refine.enc1.w");
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      const std::vector<Tensor> scales = net.refine(gg, in[0], AzimuthAxis::kCols);
      Tensor acc;
      for (size_t l = 0; l < scales.size(); ++l) {
        Tensor t = weighted_sum(gg, scales[l], 34 + l);
        acc = acc.defined() ? gg.add(acc, t) : t;
      }
      return acc;
    }, {plane, w}, {"plane", "enc w"});
  });
  s.check("stage tpv sampling", 1e-4, [](Graph& g, Rng& rng) {
    CartGridSpec cart{.x_min = -4.0, .x_max = 4.0, .y_min = -4.0, .y_max = 4.0,
                      .z_min = -1.0, .z_max = 1.0, .nx = 4, .ny = 4, .nz = 2};
    CylGridSpec cyl{.r_min = 0.0, .r_max = 6.0, .radial_bins = 4,
                    .azimuth_bins = 8, .z_bins = 2, .z_min = -1.0, .z_max = 1.0};
    TpvPlanes planes{rand_tensor(rng, {4, 8, 2}, -1.0, 1.0),
                     rand_tensor(rng, {8, 2, 2}, -1.0, 1.0),
                     rand_tensor(rng, {2, 4, 2}, -1.0, 1.0)};
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      TpvPlanes p{in[0], in[1], in[2]};
      return weighted_sum(gg, sample_tpv_features(gg, p, cart, cyl), 40);
    }, {planes.f_rd, planes.f_dz, planes.f_zr}, {"f_rd", "f_dz", "f_zr"});
  });
  s.check("stage voxel classifier", 1e-4, [](Graph& g, Rng& rng) {
    Rng wr = rng.fork(1);
    OccupancyHead head(g, "head", 3, 2, wr);
    Tensor vol = rand_tensor(rng, {2, 2, 2, 3}, -1.0, 1.0);
    Tensor w = g.parameter("head.out.w");
    return gradcheck(g, [&](Graph& gg, const std::vector<Tensor>& in) {
      return weighted_sum(gg, head.classify(gg, in[0]), 41);
    }, {vol, w}, {"volume", "head w"});
  });
}

void end_to_end_check(Suite& s) {
  s.check("end-to-end parameter slice", 1e-3, [](Graph&, Rng& rng) {
    PipelineConfig cfg;
    cfg.cart = {.x_min = -6.0, .x_max = 6.0, .y_min = -6.0, .y_max = 6.0,
                .z_min = -2.0, .z_max = 2.0, .nx = 8, .ny = 8, .nz = 8};
    cfg.cyl = {.r_min = 0.0, .r_max = 8.6, .radial_bins = 8, .azimuth_bins = 8,
               .z_bins = 8, .z_min = -2.0, .z_max = 2.0};
    cfg.depth_bins = 4;
    cfg.bin_depth = 2.0;
    cfg.groups = 2;
    cfg.channels = 4;
    cfg.geo_channels = 4;
    cfg.sem_channels = 4;
    cfg.classes = 2;
    cfg.seed = rng.next_u64();

    OccModel model(cfg, toy_camera_rig(1));
    Scene scene = random_scene(rng.next_u64(), cfg.cart, cfg.classes);
    TrainSample sample;
    sample.lidar = render_lidar(scene, 4, 12, 0.0);
    sample.gt = make_gt(scene, cfg.cart, cfg.classes);
    for (const CameraModel& cam : model.cams)
      sample.images.push_back(render_image(scene, cam));
    const std::vector<OccGrid> pyramid = gt_pyramid(sample.gt);

    std::vector<Tensor> slice = {model.graph.parameter("head.out.b"),
                                 model.graph.parameter("cam.depth.b"),
                                 model.graph.parameter("fuse.rd.b")};
    return gradcheck(model.graph, [&](Graph& gg, const std::vector<Tensor>&) {
      PipelineResult res = run_pipeline(model, sample.images, sample.lidar);
      const DepthTargets dt = depth_targets(
          sample.lidar.positions, model.cams,
          static_cast<int>(res.inter.v_depth_all.extent(2)),
          static_cast<int>(res.inter.v_depth_all.extent(3)), cfg.depth_bins,
          cfg.bin_depth);
      return total_loss(gg, res.logits, pyramid, res.inter.v_depth_all, dt,
                        cfg.lambda, nullptr);
    }, slice, {"head.out.b", "cam.depth.b", "fuse.rd.b"}, 1e-5, 1e-3);
  });
}

}  // namespace

int run_gradcheck_suite(std::ostream& out, int seeds) {
  Suite s(out, seeds);
  op_checks(s);
  loss_checks(s);
  stage_checks(s);
  end_to_end_check(s);
  out << (s.failures() == 0 ? "gradcheck suite: all checks passed\n"
                            : "gradcheck suite: FAILURES\n");
  return s.failures();
}

}  // namespace cylocc
