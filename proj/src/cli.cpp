#include "mtnet/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mtnet/errors.hpp"
#include "mtnet/evalproto.hpp"
#include "mtnet/gridcodec.hpp"
#include "mtnet/losses.hpp"
#include "mtnet/rotgeom.hpp"
#include "mtnet/run_config.hpp"
#include "mtnet/tensor_io.hpp"
#include "mtnet/toynet.hpp"

namespace mtnet {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kDigits = 9;
constexpr double kMat2EulerTolerance = 1e-6;

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(kDigits) << v;
  return s.str();
}

double round_sig(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", kDigits, v);
  return std::strtod(buf, nullptr);
}

json rounded(const json& j) {
  if (j.is_number_float()) return round_sig(j.get<double>());
  if (j.is_array() || j.is_object()) {
    json out = j;
    for (auto& item : out.items()) item.value() = rounded(item.value());
    return out;
  }
  return j;
}

void print_matrix(std::ostream& out, const Matrix3& m) {
  for (int r = 0; r < 3; ++r) out << num(m(r, 0)) << ' ' << num(m(r, 1)) << ' ' << num(m(r, 2)) << '\n';
}

std::vector<double> parse_numbers(const std::string& text) {
  std::string t = text;
  for (char& c : t) {
    if (c == ',' || c == '[' || c == ']' || c == ';') c = ' ';
  }
  std::istringstream in(t);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw InvalidArgument("");
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: '" + tok + "'");
    }
  }
  return v;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Matrix3 matrix_argument(const std::string& inline_text, const std::string& path) {
  const std::vector<double> v = parse_numbers(path.empty() ? inline_text : read_text(path));
  if (v.size() != 9) throw InvalidArgument("expected 9 matrix entries (row-major), got " + std::to_string(v.size()));
  Matrix3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v[i];
  return m;
}

std::array<Anchor, kAnchorsPerCell> anchors_argument(const std::string& text) {
  if (text.empty()) return default_anchors();
  const std::vector<double> v = parse_numbers(text);
  if (v.size() != 6) throw InvalidArgument("--anchors needs 6 numbers: w0,h0,w1,h1,w2,h2");
  return {Anchor{v[0], v[1]}, Anchor{v[2], v[3]}, Anchor{v[4], v[5]}};
}

// Grid spec for a tensor whose channel count fixes np once cls is known.
GridSpec spec_for_tensor(const GridTensor& t, int cls, const std::string& activation,
                         const std::string& anchors) {
  GridSpec s;
  s.k = t.k;
  s.cls = cls;
  if (t.channels % kAnchorsPerCell != 0) throw InvalidArgument("channel count is not a multiple of 3");
  s.np = t.channels / kAnchorsPerCell - kBoxFields - cls;
  s.box_activation = box_activation_from_string(activation);
  s.anchors = anchors_argument(anchors);
  s.validate();
  t.check_matches(s);
  return s;
}

json pose_json(const PosePayload& p) {
  if (const auto* v = std::get_if<PoseVectors>(&p)) {
    return {{"vectors", {{v->v1[0], v->v1[1], v->v1[2]}, {v->v2[0], v->v2[1], v->v2[2]}, {v->v3[0], v->v3[1], v->v3[2]}}}};
  }
  const auto& e = std::get<EulerAngles>(p);
  return {{"yaw", e.yaw}, {"pitch", e.pitch}, {"roll", e.roll}};
}

PosePayload pose_from_json(const json& j) {
  if (j.contains("vectors")) {
    const auto& v = j.at("vectors");
    PoseVectors p;
    for (int i = 0; i < 3; ++i) p[i] = Vector3(v[i][0].get<double>(), v[i][1].get<double>(), v[i][2].get<double>());
    return p;
  }
  return EulerAngles{j.at("yaw").get<double>(), j.at("pitch").get<double>(), j.at("roll").get<double>()};
}

json detection_json(int image, const Detection& d) {
  return {{"image", image},
          {"box", {d.box.cx, d.box.cy, d.box.w, d.box.h}},
          {"confidence", d.confidence},
          {"class_id", d.class_id},
          {"class_score", d.class_score},
          {"pose", pose_json(d.pose)}};
}

std::vector<std::pair<int, Detection>> read_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::vector<std::pair<int, Detection>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Detection d;
      const auto& b = j.at("box");
      d.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      d.confidence = j.at("confidence").get<double>();
      d.class_id = j.value("class_id", 0);
      d.class_score = j.value("class_score", 0.0);
      if (j.contains("pose")) d.pose = pose_from_json(j.at("pose"));
      out.emplace_back(j.value("image", 0), d);
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("malformed detection line: ") + e.what());
    }
  }
  return out;
}

// Writes JSONL either to `path` or to `out` when path is empty.
void emit_lines(const std::vector<json>& lines, const std::string& path, std::ostream& out) {
  std::ofstream file;
  std::ostream* dst = &out;
  if (!path.empty()) {
    file.open(path);
    if (!file) throw InvalidArgument("cannot write '" + path + "'");
    dst = &file;
  }
  for (const json& j : lines) *dst << (path.empty() ? rounded(j) : j).dump() << '\n';
}

PoseVectors random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  PoseVectors p;
  for (int i = 0; i < 3; ++i) p[i] = Vector3(n(rng), n(rng), n(rng));
  return p;
}

struct GradcheckResult {
  double max_rel_error;
  double tolerance;
};

GradcheckResult gradcheck_pose(std::uint64_t seed, double step) {
  std::mt19937_64 rng(seed);
  const PoseVectors pred = random_pose(rng);
  std::uniform_real_distribution<double> ang(-179.0, 179.0);
  const PoseVectors truth = pose_vectors_from_matrix(euler_to_matrix({ang(rng), ang(rng) / 2.0, ang(rng)}));
  const auto g = pose_loss_grad(pred, truth).flat();
  const auto x = pred.flat();
  const auto f = [&](std::span<const double> p) {
    std::array<double, 9> a{};
    std::copy(p.begin(), p.end(), a.begin());
    return pose_loss(PoseVectors::from_flat(a), truth);
  };
  return {grad_check(f, g, x, step), 1e-6};
}

GradcheckResult gradcheck_bbox(std::uint64_t seed, double step) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  GridSpec spec;
  spec.k = 2;
  Annotation ann{"gc", {{Box{0.3, 0.6, 0.12, 0.15}, EulerAngles{20.0, -10.0, 5.0}}}};
  const BoxTargets t = encode_targets(ann, spec);
  GridTensor act(1, spec.channels(), spec.k);
  act.activated = true;
  for (double& v : act.data) v = u(rng);
  // Every objectness channel sits at probability 0.5.
  for (int a = 0; a < kAnchorsPerCell; ++a) {
    for (int i = 0; i < spec.k; ++i) {
      for (int j = 0; j < spec.k; ++j) act.at(0, spec.channel(a, 4), i, j) = 0.5;
    }
  }
  const LossWeights w;
  std::vector<double> grad;
  multitask_loss_grad(act, spec, t, w, grad);
  const auto f = [&](std::span<const double> x) {
    GridTensor probe = act;
    std::copy(x.begin(), x.end(), probe.data.begin());
    return multitask_loss(probe, spec, t, w).total;
  };
  return {grad_check(f, grad, act.data, step), 1e-6};
}

GradcheckResult gradcheck_model(std::uint64_t seed, double step, int np) {
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.k = 2;
  cfg.backbone_widths = {3, 4, 4, 4};
  cfg.backbone_strides = {2, 2, 2, 1};
  cfg.detect_hidden = 4;
  cfg.pose_hidden = 4;
  cfg.np = np;
  cfg.seed = seed;
  const GridSpec spec = cfg.grid_spec(default_anchors());
  SyntheticConfig sc;
  sc.image_size = cfg.input_size;
  sc.min_radius = 0.2;
  sc.max_radius = 0.3;
  const std::vector<Sample> data = gen_synthetic(2, seed, sc);
  BoxTargets t(0, spec.k, spec.cls, spec.np);
  for (const Sample& s : data) t.append(encode_targets(s.annotation, spec));
  const Batch batch = make_batch(data);
  Model m = init_network(cfg);
  const LossWeights w;
  Gradients g;
  loss_and_gradient(m, batch, t, w, spec, g);
  std::vector<double> analytic;
  for (const auto& p : g.per_param) analytic.insert(analytic.end(), p.begin(), p.end());
  const std::vector<double> x = m.flat();
  const auto f = [&](std::span<const double> p) {
    Model probe = m;
    probe.set_flat(p);
    return batch_loss(probe, batch, t, w, spec).total;
  };
  return {grad_check(f, analytic, x, step), 1e-4};
}

std::vector<Annotation> annotations_of(const std::vector<Sample>& samples) {
  std::vector<Annotation> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.annotation);
  return out;
}

json report_json(const RunConfig& c, const EvalReport& r) {
  return report_to_json(r, c.eval, c.weights, c.grid_spec());
}

void add_grid_options(CLI::App* app, int& cls, std::string& activation, std::string& anchors) {
  app->add_option("--cls", cls, "Class count")->capture_default_str();
  app->add_option("--box-activation", activation, "sigmoid-conf | tanh-normalized")->capture_default_str();
  app->add_option("--anchors", anchors, "Anchor sizes w0,h0,w1,h1,w2,h2 (normalized)");
}

}  // namespace

int run_cli(std::span<char*> argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint face detection and head pose estimation toolkit"};
  app.require_subcommand(1);

  // euler2mat
  double yaw = 0.0, pitch = 0.0, roll = 0.0;
  auto* euler2mat = app.add_subcommand("euler2mat", "Yaw/pitch/roll (degrees) to rotation matrix rows");
  euler2mat->add_option("--yaw", yaw, "Yaw in degrees")->capture_default_str();
  euler2mat->add_option("--pitch", pitch, "Pitch in degrees")->capture_default_str();
  euler2mat->add_option("--roll", roll, "Roll in degrees")->capture_default_str();

  // mat2euler / project
  std::string matrix_text, matrix_file;
  auto* mat2euler = app.add_subcommand("mat2euler", "Rotation matrix to yaw pitch roll (degrees)");
  auto* project = app.add_subcommand("project", "Nearest proper rotation of a 3x3 matrix");
  for (auto* sub : {mat2euler, project}) {
    auto* a = sub->add_option("--matrix", matrix_text, "9 row-major entries, comma or space separated");
    auto* b = sub->add_option("--input", matrix_file, "File holding 9 row-major entries");
    a->excludes(b);
  }

  // loss
  std::string pred_path, ann_path, out_path;
  int cls = 1;
  std::string activation = "sigmoid-conf";
  std::string anchors;
  LossWeights weights;
  auto* loss = app.add_subcommand("loss", "Loss breakdown of a prediction tensor against annotations");
  loss->add_option("--pred", pred_path, "Prediction tensor container (raw or activated)")->required();
  loss->add_option("--annotations", ann_path, "Annotation JSONL, one line per batch image")->required();
  add_grid_options(loss, cls, activation, anchors);
  loss->add_option("--lambda-xy", weights.lambda_xy)->capture_default_str();
  loss->add_option("--lambda-wh", weights.lambda_wh)->capture_default_str();
  loss->add_option("--lambda-cls", weights.lambda_cls)->capture_default_str();
  loss->add_option("--lambda-obj", weights.lambda_obj)->capture_default_str();
  loss->add_option("--alpha", weights.alpha)->capture_default_str();

  // encode
  int k = 7, np = 9;
  auto* encode = app.add_subcommand("encode", "Annotations to an activated target tensor");
  encode->add_option("--annotations", ann_path, "Annotation JSONL")->required();
  encode->add_option("--out", out_path, "Output tensor container")->required();
  encode->add_option("--k", k, "Grid size")->capture_default_str();
  encode->add_option("--np", np, "Pose parameters per anchor (9 vector base, 3 Euler)")->capture_default_str();
  add_grid_options(encode, cls, activation, anchors);

  // decode
  std::vector<std::string> tensor_paths;
  double conf = 0.5;
  double nms_iou = 0.0;
  auto* decode_cmd = app.add_subcommand("decode", "Tensor container(s) to detections (JSONL)");
  decode_cmd->add_option("--input", tensor_paths, "Tensor container; repeat for several scales")->required();
  decode_cmd->add_option("--conf", conf, "Objectness threshold")->capture_default_str();
  decode_cmd->add_option("--nms", nms_iou, "NMS IoU threshold (0 disables unless several scales are given)");
  decode_cmd->add_option("--out", out_path, "Output JSONL (default: stdout)");
  add_grid_options(decode_cmd, cls, activation, anchors);

  // nms
  std::string det_path;
  double iou_threshold = 0.5;
  auto* nms_cmd = app.add_subcommand("nms", "Non-maximum suppression over detection JSONL, per image");
  nms_cmd->add_option("--input", det_path, "Detection JSONL")->required();
  nms_cmd->add_option("--iou", iou_threshold, "IoU threshold")->capture_default_str();
  nms_cmd->add_option("--out", out_path, "Output JSONL (default: stdout)");

  // gen-data
  int count = 16;
  std::uint64_t seed = 7;
  int image_size = 56;
  std::string out_dir;
  bool write_images = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic annotated dataset");
  gen->add_option("--n", count, "Number of images")->capture_default_str();
  gen->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gen->add_option("--image-size", image_size, "Image side in pixels")->capture_default_str();
  gen->add_option("--out-dir", out_dir, "Output directory")->required();
  gen->add_flag("--images", write_images, "Also write PPM images");

  // train / eval
  std::string config_path, weights_path;
  auto* train_cmd = app.add_subcommand("train", "Three-phase training on synthetic data, then evaluation");
  train_cmd->add_option("--config", config_path, "Run config JSON (its values take precedence over flags)");
  train_cmd->add_option("--out-dir", out_dir, "Output directory");
  train_cmd->add_option("--seed", seed, "Seed");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate weights on the held-out split of a run config");
  eval_cmd->add_option("--config", config_path, "Run config JSON")->required();
  eval_cmd->add_option("--weights", weights_path, "Weight file")->required();
  eval_cmd->add_option("--out", out_path, "Also write the report to this file");

  // gradcheck
  std::string target = "pose_loss";
  double step = 0.0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of an analytic gradient");
  gradcheck->add_option("--target", target, "pose_loss | bbox_obj | model | model_euler")
      ->check(CLI::IsMember({"pose_loss", "bbox_obj", "model", "model_euler"}))
      ->capture_default_str();
  gradcheck->add_option("--seed", seed, "Seed")->capture_default_str();
  gradcheck->add_option("--step", step, "Central-difference step (default 1e-6, 1e-4 for model targets)");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (euler2mat->parsed()) {
      print_matrix(out, euler_to_matrix({yaw, pitch, roll}).matrix());
    } else if (mat2euler->parsed()) {
      if (matrix_text.empty() && matrix_file.empty()) throw CLI::RequiredError("--matrix or --input");
      const Matrix3 m = matrix_argument(matrix_text, matrix_file);
      const RotationMatrix r = nearest_rotation(m);
      if ((r.matrix() - m).norm() > kMat2EulerTolerance) {
        throw InvalidArgument("matrix is not a proper rotation; run `project` first");
      }
      const EulerAngles e = matrix_to_euler(r);
      out << num(e.yaw) << ' ' << num(e.pitch) << ' ' << num(e.roll) << '\n';
    } else if (project->parsed()) {
      if (matrix_text.empty() && matrix_file.empty()) throw CLI::RequiredError("--matrix or --input");
      print_matrix(out, nearest_rotation(matrix_argument(matrix_text, matrix_file)).matrix());
    } else if (loss->parsed()) {
      GridTensor t = read_tensor_file(pred_path);
      const GridSpec spec = spec_for_tensor(t, cls, activation, anchors);
      const std::vector<Annotation> anns = read_annotations_file(ann_path);
      if (static_cast<int>(anns.size()) != t.batch) {
        throw InvalidArgument("annotation count " + std::to_string(anns.size()) + " does not match tensor batch " +
                              std::to_string(t.batch));
      }
      BoxTargets targets(0, spec.k, spec.cls, spec.np);
      for (const Annotation& a : anns) targets.append(encode_targets(a, spec));
      if (!t.activated) t = activate(t, spec);
      out << rounded(to_json(multitask_loss(t, spec, targets, weights))).dump(2) << '\n';
    } else if (encode->parsed()) {
      GridSpec spec;
      spec.k = k;
      spec.cls = cls;
      spec.np = np;
      spec.box_activation = box_activation_from_string(activation);
      spec.anchors = anchors_argument(anchors);
      spec.validate();
      BoxTargets targets(0, spec.k, spec.cls, spec.np);
      for (const Annotation& a : read_annotations_file(ann_path)) targets.append(encode_targets(a, spec));
      write_tensor_file(out_path, targets_to_tensor(targets, spec));
      err << "encoded " << targets.batch << " image(s), " << targets.positives() << " positive slot(s)\n";
    } else if (decode_cmd->parsed()) {
      std::vector<GridTensor> tensors;
      std::vector<GridSpec> specs;
      for (const std::string& p : tensor_paths) {
        GridTensor t = read_tensor_file(p);
        GridSpec s = spec_for_tensor(t, cls, activation, anchors);
        if (!t.activated) t = activate(t, s);
        if (!tensors.empty() && t.batch != tensors.front().batch) {
          throw InvalidArgument("scales disagree on batch size");
        }
        tensors.push_back(std::move(t));
        specs.push_back(s);
      }
      std::vector<json> lines;
      for (int b = 0; b < tensors.front().batch; ++b) {
        std::vector<Detection> dets;
        if (tensors.size() > 1) {
          std::vector<ScaleOutput> scales;
          for (std::size_t i = 0; i < tensors.size(); ++i) scales.push_back({&tensors[i], specs[i]});
          dets = decode_scales(scales, conf, nms_iou > 0.0 ? nms_iou : 0.5, b);
        } else {
          dets = decode(tensors.front(), specs.front(), conf, b);
          if (nms_iou > 0.0) dets = nms(dets, nms_iou);
        }
        for (const Detection& d : dets) lines.push_back(detection_json(b, d));
      }
      emit_lines(lines, out_path, out);
    } else if (nms_cmd->parsed()) {
      std::map<int, std::vector<Detection>> per_image;
      for (auto& [image, d] : read_detections(det_path)) per_image[image].push_back(d);
      std::vector<json> lines;
      for (const auto& [image, dets] : per_image) {
        for (const Detection& d : nms(dets, iou_threshold)) lines.push_back(detection_json(image, d));
      }
      emit_lines(lines, out_path, out);
    } else if (gen->parsed()) {
      SyntheticConfig sc;
      sc.image_size = image_size;
      const std::vector<Sample> data = gen_synthetic(count, seed, sc);
      fs::create_directories(out_dir);
      std::vector<Annotation> anns;
      for (const Sample& s : data) {
        anns.push_back(s.annotation);
        if (write_images) write_ppm((fs::path(out_dir) / (s.annotation.image_id + ".ppm")).string(), s.image);
      }
      write_annotations_file((fs::path(out_dir) / "annotations.jsonl").string(), anns);
      err << "wrote " << data.size() << " annotation(s) to " << out_dir << '\n';
    } else if (train_cmd->parsed()) {
      json cfg_json = json::object();
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw InvalidArgument("cannot open config '" + config_path + "'");
        try {
          cfg_json = json::parse(in);
        } catch (const json::exception& e) {
          throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
        }
      }
      if (train_cmd->count("--seed") > 0 && !cfg_json.contains("seed")) cfg_json["seed"] = seed;
      if (train_cmd->count("--out-dir") > 0 && !(cfg_json.contains("paths") && cfg_json["paths"].contains("out_dir"))) {
        cfg_json["paths"]["out_dir"] = out_dir;
      }
      const RunConfig rc = run_config_from_json(cfg_json);
      const fs::path dir(rc.out_dir);
      fs::create_directories(dir);
      {
        std::ofstream f(dir / "config.json");
        f << to_json(rc).dump(2) << '\n';
      }
      const Splits splits = make_splits(rc);
      const GridSpec spec = rc.grid_spec();
      const TrainResult result = train(rc.model, rc.schedule, spec, rc.weights, splits.train,
                                       [&](int phase, const Model&) { err << "phase " << phase + 1 << " done\n"; });
      save_model((dir / "weights.bin").string(), result.model);
      {
        std::ofstream f(dir / "history.jsonl");
        write_history(f, result.history);
      }
      const EvalReport report = evaluate(
          predict(result.model, spec, splits.test, rc.eval.conf_threshold, rc.eval.nms_threshold),
          annotations_of(splits.test), rc.eval);
      const json rj = report_json(rc, report);
      {
        std::ofstream f(dir / "report.json");
        f << rj.dump(2) << '\n';
      }
      out << rounded(rj).dump(2) << '\n';
    } else if (eval_cmd->parsed()) {
      const RunConfig rc = load_run_config(config_path);
      const Model m = load_model(weights_path);
      const GridSpec spec = rc.grid_spec();
      if (m.config.k != spec.k || m.config.np != spec.np || m.config.cls != spec.cls) {
        throw InvalidArgument("weights do not match the run config's grid");
      }
      const Splits splits = make_splits(rc);
      const EvalReport report = evaluate(
          predict(m, spec, splits.test, rc.eval.conf_threshold, rc.eval.nms_threshold), annotations_of(splits.test),
          rc.eval);
      const json rj = report_json(rc, report);
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw InvalidArgument("cannot write '" + out_path + "'");
        f << rj.dump(2) << '\n';
      }
      out << rounded(rj).dump(2) << '\n';
    } else if (gradcheck->parsed()) {
      GradcheckResult r{};
      if (step <= 0.0) step = target.starts_with("model") ? 1e-4 : 1e-6;
      if (target == "pose_loss") {
        r = gradcheck_pose(seed, step);
      } else if (target == "bbox_obj") {
        r = gradcheck_bbox(seed, step);
      } else {
        r = gradcheck_model(seed, step, target == "model" ? 9 : 3);
      }
      out << "target " << target << " max_rel_error " << num(r.max_rel_error) << " tolerance " << num(r.tolerance)
          << (r.max_rel_error < r.tolerance ? " PASS" : " FAIL") << '\n';
      return r.max_rel_error < r.tolerance ? kExitOk : kExitData;
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace mtnet
