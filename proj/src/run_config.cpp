#include "mtnet/run_config.hpp"

#include <fstream>

#include "mtnet/errors.hpp"

namespace mtnet {

namespace {

template <typename Fn>
void for_keys(const nlohmann::json& j, const std::string& block, Fn&& fn) {
  if (!j.is_object()) throw InvalidArgument("config block '" + block + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!fn(key, value)) throw InvalidArgument("unknown config key '" + block + "." + key + "'");
  }
}

SyntheticConfig synthetic_from_json(const nlohmann::json& j) {
  SyntheticConfig s;
  for_keys(j, "data.synthetic", [&](const std::string& k, const nlohmann::json& v) {
    if (k == "image_size") s.image_size = v.get<int>();
    else if (k == "min_markers") s.min_markers = v.get<int>();
    else if (k == "max_markers") s.max_markers = v.get<int>();
    else if (k == "min_radius") s.min_radius = v.get<double>();
    else if (k == "max_radius") s.max_radius = v.get<double>();
    else if (k == "yaw_limit") s.yaw_limit = v.get<double>();
    else if (k == "pitch_limit") s.pitch_limit = v.get<double>();
    else if (k == "roll_limit") s.roll_limit = v.get<double>();
    else if (k == "background_max") s.background_max = v.get<double>();
    else if (k == "noise_sigma") s.noise_sigma = v.get<double>();
    else if (k == "supersample") s.supersample = v.get<int>();
    else return false;
    return true;
  });
  return s;
}

nlohmann::json to_json(const SyntheticConfig& s) {
  return {{"image_size", s.image_size},         {"min_markers", s.min_markers},
          {"max_markers", s.max_markers},       {"min_radius", s.min_radius},
          {"max_radius", s.max_radius},         {"yaw_limit", s.yaw_limit},
          {"pitch_limit", s.pitch_limit},       {"roll_limit", s.roll_limit},
          {"background_max", s.background_max}, {"noise_sigma", s.noise_sigma},
          {"supersample", s.supersample}};
}

}  // namespace

void RunConfig::validate() const {
  weights.validate();
  model.validate();
  static_cast<void>(grid_spec());
  schedule.validate();
  data.synthetic.validate();
  if (data.train_count < 1 || data.test_count < 1) throw InvalidArgument("data counts must be >= 1");
  if (data.synthetic.image_size != model.input_size) {
    throw InvalidArgument("data.synthetic.image_size must equal model.input_size");
  }
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  nlohmann::json grid = nlohmann::json::object();
  bool model_seed_given = false;
  try {
    for_keys(j, "<root>", [&](const std::string& k, const nlohmann::json& v) {
      if (k == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (k == "grid") {
        grid = v;
      } else if (k == "loss_weights") {
        for_keys(v, k, [&](const std::string& wk, const nlohmann::json& wv) {
          if (wk == "lambda_xy") c.weights.lambda_xy = wv.get<double>();
          else if (wk == "lambda_wh") c.weights.lambda_wh = wv.get<double>();
          else if (wk == "lambda_cls") c.weights.lambda_cls = wv.get<double>();
          else if (wk == "lambda_obj") c.weights.lambda_obj = wv.get<double>();
          else if (wk == "alpha") c.weights.alpha = wv.get<double>();
          else return false;
          return true;
        });
      } else if (k == "model") {
        c.model = model_config_from_json(v);
        model_seed_given = v.contains("seed");
      } else if (k == "schedule") {
        c.schedule = schedule_from_json(v);
      } else if (k == "data") {
        for_keys(v, k, [&](const std::string& dk, const nlohmann::json& dv) {
          if (dk == "train_count") c.data.train_count = dv.get<int>();
          else if (dk == "test_count") c.data.test_count = dv.get<int>();
          else if (dk == "synthetic") c.data.synthetic = synthetic_from_json(dv);
          else return false;
          return true;
        });
      } else if (k == "eval") {
        for_keys(v, k, [&](const std::string& ek, const nlohmann::json& ev) {
          if (ek == "conf_threshold") c.eval.conf_threshold = ev.get<double>();
          else if (ek == "nms_threshold") c.eval.nms_threshold = ev.get<double>();
          else if (ek == "match_iou_threshold") c.eval.match_iou_threshold = ev.get<double>();
          else return false;
          return true;
        });
      } else if (k == "paths") {
        for_keys(v, k, [&](const std::string& pk, const nlohmann::json& pv) {
          if (pk == "out_dir") c.out_dir = pv.get<std::string>();
          else return false;
          return true;
        });
      } else {
        return false;
      }
      return true;
    });
    if (!model_seed_given) c.model.seed = c.seed;
    for_keys(grid, "grid", [&](const std::string& k, const nlohmann::json& v) {
      auto must_match = [&](bool ok) {
        if (!ok) throw InvalidArgument("grid." + k + " disagrees with the model block");
      };
      if (k == "anchors") {
        if (!v.is_array() || v.size() != kAnchorsPerCell) throw InvalidArgument("grid.anchors needs 3 pairs");
        for (int a = 0; a < kAnchorsPerCell; ++a) c.anchors[a] = {v[a].at(0).get<double>(), v[a].at(1).get<double>()};
      } else if (k == "k") {
        must_match(v.get<int>() == c.model.k);
      } else if (k == "cls") {
        must_match(v.get<int>() == c.model.cls);
      } else if (k == "np") {
        must_match(v.get<int>() == c.model.np);
      } else if (k == "box_activation") {
        must_match(box_activation_from_string(v.get<std::string>()) == c.model.box_activation);
      } else {
        return false;
      }
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed run config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const Anchor& a : c.anchors) anchors.push_back({a.w, a.h});
  return {{"seed", c.seed},
          {"grid",
           {{"k", c.model.k},
            {"cls", c.model.cls},
            {"np", c.model.np},
            {"box_activation", to_string(c.model.box_activation)},
            {"anchors", anchors}}},
          {"loss_weights",
           {{"lambda_xy", c.weights.lambda_xy},
            {"lambda_wh", c.weights.lambda_wh},
            {"lambda_cls", c.weights.lambda_cls},
            {"lambda_obj", c.weights.lambda_obj},
            {"alpha", c.weights.alpha}}},
          {"model", to_json(c.model)},
          {"schedule", to_json(c.schedule)},
          {"data",
           {{"train_count", c.data.train_count},
            {"test_count", c.data.test_count},
            {"synthetic", to_json(c.data.synthetic)}}},
          {"eval",
           {{"conf_threshold", c.eval.conf_threshold},
            {"nms_threshold", c.eval.nms_threshold},
            {"match_iou_threshold", c.eval.match_iou_threshold}}},
          {"paths", {{"out_dir", c.out_dir}}}};
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

Splits make_splits(const RunConfig& c) {
  std::vector<Sample> all = gen_synthetic(c.data.train_count + c.data.test_count, c.seed, c.data.synthetic);
  Splits s;
  s.test.assign(std::make_move_iterator(all.begin() + c.data.train_count), std::make_move_iterator(all.end()));
  all.resize(static_cast<std::size_t>(c.data.train_count));
  s.train = std::move(all);
  return s;
}

}  // namespace mtnet
