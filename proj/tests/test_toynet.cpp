#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "mtnet/errors.hpp"
#include "mtnet/synthetic.hpp"
#include "mtnet/toynet.hpp"

using namespace mtnet;

namespace {

ModelConfig small_config(int np = 9) {
  ModelConfig c;
  c.input_size = 16;
  c.k = 2;
  c.backbone_widths = {3, 4, 4, 4};
  c.backbone_strides = {2, 2, 2, 1};
  c.detect_hidden = 4;
  c.pose_hidden = 4;
  c.np = np;
  return c;
}

SyntheticConfig synth_for(const ModelConfig& c) {
  SyntheticConfig s;
  s.image_size = c.input_size;
  s.min_radius = 0.2;
  s.max_radius = 0.3;
  return s;
}

BoxTargets targets_for(const std::vector<Sample>& data, const GridSpec& spec) {
  BoxTargets t(0, spec.k, spec.cls, spec.np);
  for (const Sample& s : data) t.append(encode_targets(s.annotation, spec));
  return t;
}

bool same_part(const Model& a, const Model& b, Part part) {
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (a.params[i].part == part && a.params[i].value != b.params[i].value) return false;
  }
  return true;
}

}  // namespace

TEST(Synthetic, Deterministic) {
  const auto a = gen_synthetic(8, 7), b = gen_synthetic(8, 7), c = gen_synthetic(8, 8);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(a[i].image.pixels, b[i].image.pixels);
    EXPECT_EQ(a[i].annotation.image_id, b[i].annotation.image_id);
    ASSERT_EQ(a[i].annotation.objects.size(), b[i].annotation.objects.size());
    EXPECT_EQ(a[i].annotation.objects[0].box, b[i].annotation.objects[0].box);
  }
  EXPECT_NE(a[0].image.pixels, c[0].image.pixels);
  EXPECT_EQ(a[3].annotation.image_id, "7-3");
}

TEST(Synthetic, AnnotationsWithinRanges) {
  const auto data = gen_synthetic(300, 3);
  for (const Sample& s : data) {
    EXPECT_EQ(s.image.size, 56);
    EXPECT_EQ(s.image.pixels.size(), 3u * 56 * 56);
    ASSERT_GE(s.annotation.objects.size(), 1u);
    ASSERT_LE(s.annotation.objects.size(), 3u);
    for (const GroundTruth& g : s.annotation.objects) {
      EXPECT_GE(g.pose.pitch, -90.0);
      EXPECT_LE(g.pose.pitch, 90.0);
      EXPECT_GE(g.pose.yaw, -180.0);
      EXPECT_LE(g.pose.yaw, 180.0);
      EXPECT_GT(g.box.w, 0.0);
      EXPECT_GE(g.box.cx - g.box.w / 2, 0.0);
      EXPECT_LE(g.box.cx + g.box.w / 2, 1.0);
      EXPECT_GE(g.box.cy - g.box.h / 2, 0.0);
      EXPECT_LE(g.box.cy + g.box.h / 2, 1.0);
    }
    for (std::size_t i = 0; i < s.annotation.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < s.annotation.objects.size(); ++j) {
        EXPECT_EQ(iou(s.annotation.objects[i].box, s.annotation.objects[j].box), 0.0);
      }
    }
  }
}

TEST(Synthetic, RenderedExtentMatchesBox) {
  SyntheticConfig cfg;
  cfg.min_markers = cfg.max_markers = 1;
  cfg.background_max = 0.0;
  cfg.noise_sigma = 0.0;
  const auto data = gen_synthetic(200, 5, cfg);
  for (const Sample& s : data) {
    const int n = s.image.size;
    int x0 = n, y0 = n, x1 = -1, y1 = -1;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (s.image.at(0, y, x) + s.image.at(1, y, x) + s.image.at(2, y, x) == 0) continue;
        x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x + 1), y1 = std::max(y1, y + 1);
      }
    }
    const Box& b = s.annotation.objects[0].box;
    EXPECT_NEAR(x0, (b.cx - b.w / 2) * n, 1.0);
    EXPECT_NEAR(x1, (b.cx + b.w / 2) * n, 1.0);
    EXPECT_NEAR(y0, (b.cy - b.h / 2) * n, 1.0);
    EXPECT_NEAR(y1, (b.cy + b.h / 2) * n, 1.0);
  }
}

TEST(Synthetic, ColorEncodesYawAndPitch) {
  const auto c = marker_color({0, 0, 0});
  EXPECT_DOUBLE_EQ(c[0], 0.9);
  EXPECT_DOUBLE_EQ(c[1], 0.5);
  EXPECT_DOUBLE_EQ(c[2], 0.5);
  const auto d = marker_color({90, 90, 0});
  EXPECT_NEAR(d[0], 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(d[1], 0.9);
  EXPECT_DOUBLE_EQ(d[2], 0.9);
}

TEST(ModelConfig, StrideChain) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.input_size = 50;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ModelConfig{};
  c.k = 5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ModelConfig{};
  c.backbone_widths = {8, 16};
  EXPECT_THROW(init_network(c), InvalidArgument);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = small_config(3);
  c.box_activation = BoxActivation::kTanh;
  const ModelConfig d = model_config_from_json(to_json(c));
  EXPECT_EQ(to_json(d), to_json(c));
  nlohmann::json j = to_json(c);
  j["depth"] = 3;
  EXPECT_THROW(model_config_from_json(j), InvalidArgument);
}

TEST(InitNetwork, SeededAndShaped) {
  const Model a = init_network(ModelConfig{}), b = init_network(ModelConfig{});
  EXPECT_EQ(a.flat(), b.flat());
  ModelConfig other;
  other.seed = 8;
  EXPECT_NE(init_network(other).flat(), a.flat());
  for (const Param& p : a.params) {
    if (p.name.ends_with(".bias")) {
      for (double v : p.value) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(Forward, OutputShapes) {
  const Image blank{56, std::vector<std::uint8_t>(3 * 56 * 56, 0)};
  for (int np : {9, 3}) {
    ModelConfig c;
    c.np = np;
    const GridTensor out = forward(init_network(c), make_batch(std::vector<const Image*>{&blank}));
    EXPECT_EQ(out.batch, 1);
    EXPECT_EQ(out.channels, np == 9 ? 45 : 27);
    EXPECT_EQ(out.channels, channels_for(1, np));
    EXPECT_EQ(out.k, 7);
    EXPECT_FALSE(out.activated);
    for (double v : out.data) EXPECT_TRUE(std::isfinite(v));
  }
  ModelConfig two;
  two.cls = 2;
  EXPECT_EQ(forward(init_network(two), make_batch(std::vector<const Image*>{&blank})).channels, 48);
}

TEST(Forward, ZeroWeightsGiveZeroOutput) {
  Model m = init_network(small_config());
  m.set_flat(std::vector<double>(m.parameter_count(), 0.0));
  const auto data = gen_synthetic(2, 1, synth_for(m.config));
  for (double v : forward(m, make_batch(data)).data) EXPECT_EQ(v, 0.0);
}

TEST(Forward, BatchSizeMismatch) {
  const Model m = init_network(small_config());
  const auto data = gen_synthetic(1, 1);
  EXPECT_THROW(forward(m, make_batch(data)), InvalidArgument);
}

TEST(Forward, BranchSeparation) {
  const Model m = init_network(ModelConfig{});
  const auto data = gen_synthetic(2, 2);
  const GridSpec spec = m.config.grid_spec(default_anchors());
  const GridTensor base = forward(m, make_batch(data));

  Model pose_changed = m;
  for (Param& p : pose_changed.params) {
    if (p.part == Part::kPoseHead) {
      for (double& v : p.value) v += 0.05;
    }
  }
  const GridTensor a = forward(pose_changed, make_batch(data));
  bool pose_moved = false;
  for (int b = 0; b < 2; ++b) {
    for (int anchor = 0; anchor < 3; ++anchor) {
      for (int f = 0; f < spec.fields_per_anchor(); ++f) {
        for (int i = 0; i < spec.k; ++i) {
          for (int j = 0; j < spec.k; ++j) {
            const int c = spec.channel(anchor, f);
            if (f < spec.pose_offset()) {
              EXPECT_EQ(a.at(b, c, i, j), base.at(b, c, i, j));
            } else {
              pose_moved |= a.at(b, c, i, j) != base.at(b, c, i, j);
            }
          }
        }
      }
    }
  }
  EXPECT_TRUE(pose_moved);

  Model backbone_changed = m;
  for (double& v : backbone_changed.param("backbone.0.weight").value) v *= 1.1;
  const GridTensor c = forward(backbone_changed, make_batch(data));
  double det_diff = 0.0, pose_diff = 0.0;
  for (int i = 0; i < spec.k; ++i) {
    for (int j = 0; j < spec.k; ++j) {
      det_diff += std::abs(c.at(0, spec.channel(0, 4), i, j) - base.at(0, spec.channel(0, 4), i, j));
      pose_diff += std::abs(c.at(0, spec.channel(0, spec.pose_offset()), i, j) -
                            base.at(0, spec.channel(0, spec.pose_offset()), i, j));
    }
  }
  EXPECT_GT(det_diff, 0.0);
  EXPECT_GT(pose_diff, 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (int np : {9, 3}) {
    for (BoxActivation act : {BoxActivation::kSigmoid, BoxActivation::kTanh}) {
      ModelConfig c = small_config(np);
      c.box_activation = act;
      const GridSpec spec = c.grid_spec(default_anchors());
      const auto data = gen_synthetic(2, 3, synth_for(c));
      const BoxTargets t = targets_for(data, spec);
      const Batch batch = make_batch(data);
      const Model m = init_network(c);
      const LossWeights w{1.0, 1.0, 1.0, 1.0, 0.4};
      Gradients g;
      loss_and_gradient(m, batch, t, w, spec, g);
      std::vector<double> analytic;
      for (const auto& p : g.per_param) analytic.insert(analytic.end(), p.begin(), p.end());
      const auto f = [&](std::span<const double> x) {
        Model probe = m;
        probe.set_flat(x);
        return batch_loss(probe, batch, t, w, spec).total;
      };
      EXPECT_LT(grad_check(f, analytic, m.flat(), 1e-4), 1e-4) << "np " << np;
    }
  }
}

TEST(TrainStep, ZeroRateAndFullFreezeLeaveParameters) {
  const ModelConfig c = small_config();
  const GridSpec spec = c.grid_spec(default_anchors());
  const auto data = gen_synthetic(2, 4, synth_for(c));
  const BoxTargets t = targets_for(data, spec);
  Model m = init_network(c);
  const std::vector<double> before = m.flat();
  train_step(m, make_batch(data), t, LossWeights{}, spec, 0.0, {});
  EXPECT_EQ(m.flat(), before);
  train_step(m, make_batch(data), t, LossWeights{}, spec, 10.0,
             {Part::kBackbone, Part::kDetectHead, Part::kPoseHead});
  EXPECT_EQ(m.flat(), before);
  train_step(m, make_batch(data), t, LossWeights{}, spec, 0.01, {Part::kPoseHead});
  EXPECT_NE(m.flat(), before);
  EXPECT_TRUE(same_part(m, init_network(c), Part::kPoseHead));
}

TEST(TrainStep, NonFiniteLossAborts) {
  const ModelConfig c = small_config();
  const GridSpec spec = c.grid_spec(default_anchors());
  const auto data = gen_synthetic(2, 4, synth_for(c));
  const BoxTargets t = targets_for(data, spec);
  Model m = init_network(c);
  for (double& v : m.param("pose.agg2.bias").value) v = 1e200;
  const std::vector<double> before = m.flat();
  EXPECT_THROW(train_step(m, make_batch(data), t, LossWeights{}, spec, 0.1, {}), NumericError);
  EXPECT_EQ(m.flat(), before);
}

TEST(Train, FreezesAndDeterminism) {
  const ModelConfig c = small_config();
  const GridSpec spec = c.grid_spec(default_anchors());
  const auto data = gen_synthetic(12, 5, synth_for(c));
  PhaseSchedule sched;
  sched.phases = {{1, 4, 0.05, {Part::kBackbone, Part::kPoseHead}}, {1, 4, 0.05, {Part::kPoseHead}}, {1, 4, 0.02, {}}};
  const Model init = init_network(c);
  std::vector<Model> snapshots;
  const TrainResult r = train(c, sched, spec, LossWeights{}, data,
                              [&](int, const Model& m) { snapshots.push_back(m); });
  ASSERT_EQ(snapshots.size(), 3u);
  EXPECT_TRUE(same_part(snapshots[0], init, Part::kPoseHead));
  EXPECT_TRUE(same_part(snapshots[0], init, Part::kBackbone));
  EXPECT_FALSE(same_part(snapshots[0], init, Part::kDetectHead));
  EXPECT_TRUE(same_part(snapshots[1], init, Part::kPoseHead));
  EXPECT_FALSE(same_part(snapshots[1], snapshots[0], Part::kBackbone));
  EXPECT_FALSE(same_part(snapshots[2], snapshots[1], Part::kPoseHead));

  ASSERT_EQ(r.history.steps.size(), 9u);
  for (std::size_t i = 1; i < r.history.steps.size(); ++i) {
    EXPECT_GE(r.history.steps[i].phase, r.history.steps[i - 1].phase);
    EXPECT_GT(r.history.steps[i].step, r.history.steps[i - 1].step);
  }
  const TrainResult again = train(c, sched, spec, LossWeights{}, data);
  EXPECT_EQ(again.model.flat(), r.model.flat());
  for (std::size_t i = 0; i < r.history.steps.size(); ++i) {
    EXPECT_EQ(again.history.steps[i].loss.total, r.history.steps[i].loss.total);
  }
}

TEST(Train, OverfitsFixedBatch) {
  ModelConfig c;
  const GridSpec spec = c.grid_spec(default_anchors());
  const auto data = gen_synthetic(4, 9);
  const BoxTargets t = targets_for(data, spec);
  const Batch batch = make_batch(data);
  Model m = init_network(c);
  const double initial = batch_loss(m, batch, t, LossWeights{}, spec).total;
  for (int step = 0; step < 500; ++step) train_step(m, batch, t, LossWeights{}, spec, 0.012, {});
  const double last = batch_loss(m, batch, t, LossWeights{}, spec).total;
  // Reference seed reaches 0.222 of the initial loss.
  EXPECT_LT(last, 0.3 * initial) << "initial " << initial << " final " << last;
}

TEST(Schedule, ValidationAndJson) {
  PhaseSchedule s = PhaseSchedule::desk_default();
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.phases.size(), 3u);
  EXPECT_EQ(s.phases[0].frozen, (PartSet{Part::kBackbone, Part::kPoseHead}));
  EXPECT_EQ(s.phases[1].frozen, (PartSet{Part::kPoseHead}));
  EXPECT_TRUE(s.phases[2].frozen.empty());
  EXPECT_EQ(to_json(schedule_from_json(to_json(s))), to_json(s));
  s.phases.pop_back();
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(ModelFile, SaveLoadBitExact) {
  const Model m = init_network(small_config(3));
  const auto path = (std::filesystem::temp_directory_path() / "mtnet_test_weights.bin").string();
  save_model(path, m);
  const Model back = load_model(path);
  EXPECT_EQ(back.flat(), m.flat());
  EXPECT_EQ(to_json(back.config), to_json(m.config));
  std::remove(path.c_str());
  EXPECT_THROW(load_model(path), InvalidArgument);
}
