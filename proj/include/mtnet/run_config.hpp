#pragma once

// Self-describing run configuration for `train` / `eval`.
//
// {
//   "seed": 7,
//   "grid": {"anchors": [[w, h], [w, h], [w, h]]},
//   "loss_weights": {"lambda_xy": 1, "lambda_wh": 1, "lambda_cls": 1, "lambda_obj": 1, "alpha": 0.5},
//   "model": {...ModelConfig...},
//   "schedule": [{"epochs", "batch_size", "learning_rate", "frozen": [...]}, x3],
//   "data": {"train_count": 2000, "test_count": 500, "synthetic": {...}},
//   "eval": {"conf_threshold": 0.1, "nms_threshold": 0.5, "match_iou_threshold": 0.5},
//   "paths": {"out_dir": "run"}
// }
//
// Every block is optional; missing values take their defaults. Unknown keys
// are rejected. The grid block may repeat k / cls / np / box_activation, which
// must then agree with the model block.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "mtnet/evalproto.hpp"
#include "mtnet/synthetic.hpp"
#include "mtnet/toynet.hpp"

namespace mtnet {

struct DataConfig {
  int train_count = 2000;
  int test_count = 500;
  SyntheticConfig synthetic;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::array<Anchor, kAnchorsPerCell> anchors = default_anchors();
  LossWeights weights;
  ModelConfig model;
  PhaseSchedule schedule = PhaseSchedule::desk_default();
  DataConfig data;
  EvalConfig eval{0.5, 0.1, 0.5};
  std::string out_dir = "run";

  [[nodiscard]] GridSpec grid_spec() const { return model.grid_spec(anchors); }
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
/// Fully materialized document (every default written out).
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

/// Train and held-out splits generated from one stream: the first
/// train_count samples train, the remaining test_count evaluate.
struct Splits {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
Splits make_splits(const RunConfig& c);

}  // namespace mtnet
