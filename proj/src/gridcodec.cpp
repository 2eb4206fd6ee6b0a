#include "mtnet/gridcodec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtnet/errors.hpp"

namespace mtnet {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return std::log(q / (1.0 - q));
}

void check_box(const Box& b) {
  if (!(b.w > 0.0) || !(b.h > 0.0) || !std::isfinite(b.w) || !std::isfinite(b.h) ||
      !std::isfinite(b.cx) || !std::isfinite(b.cy)) {
    throw InvalidArgument("box sizes must be positive and finite");
  }
}

// IoU of two sizes placed at a common center.
double shape_iou(double w0, double h0, double w1, double h1) {
  const double inter = std::min(w0, w1) * std::min(h0, h1);
  return inter / (w0 * h0 + w1 * h1 - inter);
}

}  // namespace

Box Box::from_corners(double x0, double y0, double x1, double y1) {
  return {(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0};
}

double iou(const Box& a, const Box& b) {
  check_box(a);
  check_box(b);
  if (a == b) return 1.0;
  const double ix = std::min(a.cx + a.w / 2, b.cx + b.w / 2) - std::max(a.cx - a.w / 2, b.cx - b.w / 2);
  const double iy = std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

GridTensor activate(const GridTensor& raw, const GridSpec& spec) {
  spec.validate();
  raw.check_matches(spec);
  if (raw.activated) throw StateError("tensor is already activated");
  GridTensor out = raw;
  out.activated = true;
  const bool tanh_xy = spec.box_activation == BoxActivation::kTanh;
  const std::size_t plane = static_cast<std::size_t>(spec.k) * spec.k;
  for (int b = 0; b < raw.batch; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int f = 0; f < kBoxFields + spec.cls; ++f) {
        if (f == 2 || f == 3) continue;
        double* p = &out.data[out.index(b, spec.channel(a, f), 0, 0)];
        const bool use_tanh = tanh_xy && f < 2;
        for (std::size_t q = 0; q < plane; ++q) p[q] = use_tanh ? std::tanh(p[q]) : sigmoid(p[q]);
      }
    }
  }
  return out;
}

GridTensor deactivate(const GridTensor& act, const GridSpec& spec) {
  spec.validate();
  act.check_matches(spec);
  if (!act.activated) throw StateError("tensor is not activated");
  GridTensor out = act;
  out.activated = false;
  const bool tanh_xy = spec.box_activation == BoxActivation::kTanh;
  const std::size_t plane = static_cast<std::size_t>(spec.k) * spec.k;
  for (int b = 0; b < act.batch; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int f = 0; f < kBoxFields + spec.cls; ++f) {
        if (f == 2 || f == 3) continue;
        double* p = &out.data[out.index(b, spec.channel(a, f), 0, 0)];
        for (std::size_t q = 0; q < plane; ++q) {
          if (tanh_xy && f < 2) {
            const double lim = 1.0 - 2.0 * kProbabilityClamp;
            p[q] = std::atanh(std::clamp(p[q], -lim, lim));
          } else {
            p[q] = logit(p[q]);
          }
        }
      }
    }
  }
  return out;
}

EulerAngles euler_from_normalized(double yaw_n, double pitch_n, double roll_n) {
  auto c = [](double v) { return std::clamp(v, -1.0, 1.0); };
  return EulerAngles{180.0 * c(yaw_n), 90.0 * c(pitch_n), 90.0 * c(roll_n)}.normalized();
}

std::vector<double> pose_target(const EulerAngles& angles, int np) {
  if (np == 9) {
    const auto f = pose_vectors_from_matrix(euler_to_matrix(angles)).flat();
    return {f.begin(), f.end()};
  }
  if (np == 3) {
    const EulerAngles n = angles.normalized();
    return {n.yaw / 180.0, n.pitch / 90.0, n.roll / 90.0};
  }
  throw InvalidArgument("pose parameter count must be 3 or 9");
}

std::vector<Detection> decode(const GridTensor& act, const GridSpec& spec, double conf_threshold,
                              int image) {
  spec.validate();
  act.check_matches(spec);
  if (!act.activated) throw StateError("decode expects an activated tensor");
  if (image < 0 || image >= act.batch) throw InvalidArgument("decode: image index out of range");
  const int k = spec.k;
  const bool tanh_xy = spec.box_activation == BoxActivation::kTanh;
  std::vector<Detection> out;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      for (int a = 0; a < kAnchorsPerCell; ++a) {
        auto v = [&](int field) { return act.at(image, spec.channel(a, field), i, j); };
        const double conf = v(4);
        if (!(conf >= conf_threshold)) continue;
        double tx = v(0);
        double ty = v(1);
        if (tanh_xy) {
          tx = 0.5 * (tx + 1.0);
          ty = 0.5 * (ty + 1.0);
        }
        Detection d;
        d.box = {(j + tx) / k, (i + ty) / k, spec.anchors[a].w * std::exp(v(2)),
                 spec.anchors[a].h * std::exp(v(3))};
        d.confidence = conf;
        d.class_id = 0;
        d.class_score = v(kBoxFields);
        for (int c = 1; c < spec.cls; ++c) {
          if (v(kBoxFields + c) > d.class_score) {
            d.class_score = v(kBoxFields + c);
            d.class_id = c;
          }
        }
        const int off = spec.pose_offset();
        if (spec.np == 9) {
          std::array<double, 9> f{};
          for (int q = 0; q < 9; ++q) f[q] = v(off + q);
          d.pose = PoseVectors::from_flat(f);
        } else {
          d.pose = euler_from_normalized(v(off), v(off + 1), v(off + 2));
        }
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

BoxTargets encode_targets(const Annotation& ann, const GridSpec& spec) {
  spec.validate();
  const int k = spec.k;
  BoxTargets t(1, k, spec.cls, spec.np);

  struct Candidate {
    std::size_t index;
    int i, j;
    std::array<double, kAnchorsPerCell> ious;
  };
  std::vector<Candidate> cands;
  for (std::size_t n = 0; n < ann.objects.size(); ++n) {
    const Box& box = ann.objects[n].box;
    check_box(box);
    if (box.cx < 0.0 || box.cx > 1.0 || box.cy < 0.0 || box.cy > 1.0) {
      throw InvalidArgument("annotation box center outside [0, 1]");
    }
    Candidate c{n, std::min(static_cast<int>(box.cy * k), k - 1),
                std::min(static_cast<int>(box.cx * k), k - 1), {}};
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      c.ious[a] = shape_iou(box.w, box.h, spec.anchors[a].w, spec.anchors[a].h);
    }
    cands.push_back(c);
  }
  // Larger boxes claim their preferred anchor first; equal areas keep file order.
  std::stable_sort(cands.begin(), cands.end(), [&](const Candidate& x, const Candidate& y) {
    return ann.objects[x.index].box.area() > ann.objects[y.index].box.area();
  });

  for (const Candidate& c : cands) {
    std::array<int, kAnchorsPerCell> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return c.ious[x] > c.ious[y]; });
    int chosen = -1;
    for (int a : order) {
      if (t.obj[t.slot(0, a, c.i, c.j)] != ObjTarget::kPositive) {
        chosen = a;
        break;
      }
    }
    if (chosen < 0) continue;  // every anchor of this cell is taken by larger boxes
    const GroundTruth& gt = ann.objects[c.index];
    const std::size_t s = t.slot(0, chosen, c.i, c.j);
    t.obj[s] = ObjTarget::kPositive;
    t.tx[s] = gt.box.cx * k - c.j;
    t.ty[s] = gt.box.cy * k - c.i;
    t.tw[s] = std::log(gt.box.w / spec.anchors[chosen].w);
    t.th[s] = std::log(gt.box.h / spec.anchors[chosen].h);
    t.class_id[s] = 0;
    const std::vector<double> pose = pose_target(gt.pose, spec.np);
    std::copy(pose.begin(), pose.end(), t.pose.begin() + static_cast<std::ptrdiff_t>(s * spec.np));
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      const std::size_t o = t.slot(0, a, c.i, c.j);
      if (a != chosen && c.ious[a] > 0.5 && t.obj[o] == ObjTarget::kNegative) t.obj[o] = ObjTarget::kIgnore;
    }
  }
  return t;
}

GridTensor targets_to_tensor(const BoxTargets& t, const GridSpec& spec) {
  spec.validate();
  if (t.k != spec.k || t.cls != spec.cls || t.np != spec.np) {
    throw InvalidArgument("targets do not match the grid spec");
  }
  GridTensor out(t.batch, spec.channels(), spec.k);
  out.activated = true;
  const bool tanh_xy = spec.box_activation == BoxActivation::kTanh;
  for (int b = 0; b < t.batch; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int i = 0; i < spec.k; ++i) {
        for (int j = 0; j < spec.k; ++j) {
          const std::size_t s = t.slot(b, a, i, j);
          if (t.obj[s] != ObjTarget::kPositive) continue;
          auto at = [&](int f) -> double& { return out.at(b, spec.channel(a, f), i, j); };
          at(0) = tanh_xy ? 2.0 * t.tx[s] - 1.0 : t.tx[s];
          at(1) = tanh_xy ? 2.0 * t.ty[s] - 1.0 : t.ty[s];
          at(2) = t.tw[s];
          at(3) = t.th[s];
          at(4) = 1.0;
          at(kBoxFields + t.class_id[s]) = 1.0;
          for (int q = 0; q < spec.np; ++q) at(spec.pose_offset() + q) = t.pose[s * spec.np + q];
        }
      }
    }
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return dets[x].confidence > dets[y].confidence;
  });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> decode_scales(const std::vector<ScaleOutput>& scales, double conf_threshold,
                                     double nms_threshold, int image) {
  std::vector<Detection> all;
  for (const ScaleOutput& s : scales) {
    std::vector<Detection> d = decode(*s.tensor, s.spec, conf_threshold, image);
    all.insert(all.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
  }
  return nms(all, nms_threshold);
}

// --- Annotation files ----------------------------------------------------

namespace {

Annotation annotation_from_json(const nlohmann::json& j) {
  Annotation a;
  a.image_id = j.at("image_id").get<std::string>();
  for (const auto& o : j.at("objects")) {
    const auto& b = o.at("box");
    if (!b.is_array() || b.size() != 4) throw InvalidArgument("box must be [cx, cy, w, h]");
    GroundTruth g;
    g.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    const auto& p = o.at("pose");
    g.pose = {p.at("yaw").get<double>(), p.at("pitch").get<double>(), p.at("roll").get<double>()};
    a.objects.push_back(g);
  }
  return a;
}

nlohmann::json annotation_to_json(const Annotation& a) {
  nlohmann::json objs = nlohmann::json::array();
  for (const GroundTruth& g : a.objects) {
    objs.push_back({{"box", {g.box.cx, g.box.cy, g.box.w, g.box.h}},
                    {"pose", {{"yaw", g.pose.yaw}, {"pitch", g.pose.pitch}, {"roll", g.pose.roll}}}});
  }
  return {{"image_id", a.image_id}, {"objects", objs}};
}

}  // namespace

std::vector<Annotation> read_annotations(std::istream& in) {
  std::vector<Annotation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("annotation line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Annotation> read_annotations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open annotation file '" + path + "'");
  return read_annotations(in);
}

void write_annotations(std::ostream& out, const std::vector<Annotation>& anns) {
  for (const Annotation& a : anns) out << annotation_to_json(a).dump() << '\n';
}

void write_annotations_file(const std::string& path, const std::vector<Annotation>& anns) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write annotation file '" + path + "'");
  write_annotations(out, anns);
}

}  // namespace mtnet
