#pragma once

// Desk-scale multitask network: a strided convolutional backbone shared by a
// detection head and a pose head. The pose head concatenates the backbone
// features with the detection head's hidden features and applies two 3x3
// convolutions. All arithmetic is double precision.

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtnet/evalproto.hpp"
#include "mtnet/grid.hpp"
#include "mtnet/losses.hpp"
#include "mtnet/synthetic.hpp"

namespace mtnet {

enum class Part { kBackbone, kDetectHead, kPoseHead };

const char* to_string(Part p);
Part part_from_string(const std::string& s);

using PartSet = std::set<Part>;

struct ModelConfig {
  int input_size = 56;
  int k = 7;
  std::vector<int> backbone_widths{8, 16, 32, 32};
  std::vector<int> backbone_strides{2, 2, 2, 1};
  int detect_hidden = 32;
  int pose_hidden = 32;
  int cls = 1;
  int np = 9;
  BoxActivation box_activation = BoxActivation::kSigmoid;
  std::uint64_t seed = 7;

  /// Throws InvalidArgument if the stride chain does not map input_size onto K.
  void validate() const;
  [[nodiscard]] GridSpec grid_spec(const std::array<Anchor, kAnchorsPerCell>& anchors) const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Param {
  std::string name;
  Part part;
  std::vector<int> shape;
  std::vector<double> value;
};

struct Model {
  ModelConfig config;
  std::vector<Param> params;

  [[nodiscard]] const Param& param(const std::string& name) const;
  Param& param(const std::string& name);
  [[nodiscard]] std::size_t parameter_count() const;

  /// All parameters flattened in declaration order.
  [[nodiscard]] std::vector<double> flat() const;
  void set_flat(std::span<const double> values);
};

/// Fan-in scaled uniform initialization, U(-sqrt(3 / fan_in), sqrt(3 / fan_in)); biases zero.
Model init_network(const ModelConfig& cfg);

/// Input batch as doubles in [0, 1], layout (batch, 3, size, size).
struct Batch {
  int count = 0;
  int size = 0;
  std::vector<double> pixels;
};

Batch make_batch(std::span<const Sample> samples);
Batch make_batch(const std::vector<const Image*>& images);

/// Raw (not activated) output tensor of shape (batch, channels_for(cls, np), K, K).
GridTensor forward(const Model& m, const Batch& batch);

struct Gradients {
  std::vector<std::vector<double>> per_param;  // same order as Model::params
};

/// Total loss of the batch and its gradient with respect to every parameter.
/// Backpropagation into the backbone is skipped when `backbone_grad` is false.
LossBreakdown loss_and_gradient(const Model& m, const Batch& batch, const BoxTargets& targets,
                                const LossWeights& w, const GridSpec& spec, Gradients& grads,
                                bool backbone_grad = true);

/// Loss only (no backward pass).
LossBreakdown batch_loss(const Model& m, const Batch& batch, const BoxTargets& targets,
                         const LossWeights& w, const GridSpec& spec);

/// One plain gradient-descent step on every parameter outside `frozen`.
/// Throws NumericError on a non-finite loss or gradient, leaving the model untouched.
LossBreakdown train_step(Model& m, const Batch& batch, const BoxTargets& targets,
                         const LossWeights& w, const GridSpec& spec, double lr, const PartSet& frozen);

struct Phase {
  int epochs = 1;
  int batch_size = 8;
  double learning_rate = 1e-2;
  PartSet frozen;
};

struct PhaseSchedule {
  std::vector<Phase> phases;

  void validate() const;
  /// Desk-scale three-phase default: detection head only, then backbone +
  /// detection head, then everything.
  static PhaseSchedule desk_default();
};

nlohmann::json to_json(const PhaseSchedule& s);
PhaseSchedule schedule_from_json(const nlohmann::json& j);

struct StepRecord {
  int phase = 0;
  int epoch = 0;
  int step = 0;
  double learning_rate = 0.0;
  LossBreakdown loss;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
};

nlohmann::json to_json(const LossBreakdown& l);
LossBreakdown loss_breakdown_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StepRecord& r);
void write_history(std::ostream& out, const TrainHistory& h);

struct TrainResult {
  Model model;
  TrainHistory history;
};

using PhaseCallback = std::function<void(int phase, const Model&)>;

/// Runs the phases in order. Shuffling uses a generator seeded from cfg.seed,
/// so identical inputs give bit-identical results. Errors from a step are
/// rethrown with phase and step context.
TrainResult train(const ModelConfig& cfg, const PhaseSchedule& schedule, const GridSpec& spec,
                  const LossWeights& w, std::span<const Sample> data,
                  const PhaseCallback& on_phase_end = {});

/// Activated predictions decoded per image and NMS-filtered.
std::vector<ImagePredictions> predict(const Model& m, const GridSpec& spec, std::span<const Sample> data,
                                     double conf_threshold, double nms_threshold, int batch_size = 32);

/// Weight file: tensor container whose header holds {"architecture": ModelConfig,
/// "tensors": [{"name", "part", "shape"}...]}; payload is the parameters
/// concatenated in that order, stored as f64.
void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

}  // namespace mtnet
