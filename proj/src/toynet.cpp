#include "mtnet/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/Core>

#include "mtnet/errors.hpp"
#include "mtnet/gridcodec.hpp"
#include "mtnet/tensor_io.hpp"

namespace mtnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Feature map stored channel-major across the batch: (channels, batch, h, w).
// Rows of the (channels, batch * h * w) matrix view are channels, which makes
// channel concatenation a plain append.
struct Feature {
  int c = 0;
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<double> d;

  Feature() = default;
  Feature(int c_, int n_, int h_, int w_)
      : c(c_), n(n_), h(h_), w(w_), d(static_cast<std::size_t>(c_) * n_ * h_ * w_, 0.0) {}
  [[nodiscard]] int cols() const { return n * h * w; }
  MapMat mat() { return {d.data(), c, cols()}; }
  [[nodiscard]] ConstMapMat mat() const { return {d.data(), c, cols()}; }
};

struct ConvShape {
  int cin, cout, ksize, stride, pad;
};

int out_dim(int in, const ConvShape& s) { return (in + 2 * s.pad - s.ksize) / s.stride + 1; }

// cols: (cin * k * k, n * ho * wo)
void im2col(const Feature& in, const ConvShape& s, int ho, int wo, std::vector<double>& cols) {
  const int k = s.ksize;
  const std::size_t m = static_cast<std::size_t>(in.n) * ho * wo;
  cols.assign(static_cast<std::size_t>(in.c) * k * k * m, 0.0);
  for (int ci = 0; ci < in.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = &cols[((static_cast<std::size_t>(ci) * k + ky) * k + kx) * m];
        for (int b = 0; b < in.n; ++b) {
          const double* src = &in.d[(static_cast<std::size_t>(ci) * in.n + b) * in.h * in.w];
          for (int oy = 0; oy < ho; ++oy) {
            const int y = oy * s.stride - s.pad + ky;
            double* dst = row + (static_cast<std::size_t>(b) * ho + oy) * wo;
            if (y < 0 || y >= in.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int x = ox * s.stride - s.pad + kx;
              if (x >= 0 && x < in.w) dst[ox] = src[y * in.w + x];
            }
          }
        }
      }
    }
  }
}

// Accumulates column gradients back into the input layout.
void col2im(const std::vector<double>& cols, const ConvShape& s, int ho, int wo, Feature& din) {
  const int k = s.ksize;
  const std::size_t m = static_cast<std::size_t>(din.n) * ho * wo;
  for (int ci = 0; ci < din.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = &cols[((static_cast<std::size_t>(ci) * k + ky) * k + kx) * m];
        for (int b = 0; b < din.n; ++b) {
          double* dst = &din.d[(static_cast<std::size_t>(ci) * din.n + b) * din.h * din.w];
          for (int oy = 0; oy < ho; ++oy) {
            const int y = oy * s.stride - s.pad + ky;
            if (y < 0 || y >= din.h) continue;
            const double* src = row + (static_cast<std::size_t>(b) * ho + oy) * wo;
            for (int ox = 0; ox < wo; ++ox) {
              const int x = ox * s.stride - s.pad + kx;
              if (x >= 0 && x < din.w) dst[y * din.w + x] += src[ox];
            }
          }
        }
      }
    }
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

Feature apply_silu(const Feature& z) {
  Feature out = z;
  for (double& v : out.d) v = silu(v);
  return out;
}

struct ConvLayer {
  std::size_t weight;  // index into Model::params
  std::size_t bias;
  ConvShape shape;
};

struct ConvCache {
  std::vector<double> cols;
  Feature z;  // pre-activation output
};

Feature conv_forward(const Model& m, const ConvLayer& l, const Feature& in, ConvCache& cache) {
  const int ho = out_dim(in.h, l.shape);
  const int wo = out_dim(in.w, l.shape);
  im2col(in, l.shape, ho, wo, cache.cols);
  const int kdim = l.shape.cin * l.shape.ksize * l.shape.ksize;
  Feature out(l.shape.cout, in.n, ho, wo);
  ConstMapMat w(m.params[l.weight].value.data(), l.shape.cout, kdim);
  ConstMapMat cols(cache.cols.data(), kdim, out.cols());
  Eigen::Map<const Eigen::VectorXd> b(m.params[l.bias].value.data(), l.shape.cout);
  out.mat().noalias() = w * cols;
  out.mat().colwise() += b;
  cache.z = out;
  return out;
}

// dz is the gradient at the conv output (pre-activation). Accumulates weight
// and bias gradients; writes the input gradient when `din` is non-null.
void conv_backward(const Model& m, const ConvLayer& l, const ConvCache& cache, const Feature& dz,
                   Gradients& g, Feature* din) {
  const int kdim = l.shape.cin * l.shape.ksize * l.shape.ksize;
  ConstMapMat cols(cache.cols.data(), kdim, dz.cols());
  MapMat dw(g.per_param[l.weight].data(), l.shape.cout, kdim);
  dw.noalias() += dz.mat() * cols.transpose();
  Eigen::Map<Eigen::VectorXd> db(g.per_param[l.bias].data(), l.shape.cout);
  db += dz.mat().rowwise().sum();
  if (din != nullptr) {
    ConstMapMat w(m.params[l.weight].value.data(), l.shape.cout, kdim);
    std::vector<double> dcols(static_cast<std::size_t>(kdim) * dz.cols());
    MapMat dc(dcols.data(), kdim, dz.cols());
    dc.noalias() = w.transpose() * dz.mat();
    col2im(dcols, l.shape, dz.h, dz.w, *din);
  }
}

Feature silu_backward(const Feature& dy, const Feature& z) {
  Feature dz = dy;
  for (std::size_t i = 0; i < dz.d.size(); ++i) dz.d[i] *= silu_grad(z.d[i]);
  return dz;
}

Feature concat(const Feature& a, const Feature& b) {
  Feature out(a.c + b.c, a.n, a.h, a.w);
  std::copy(a.d.begin(), a.d.end(), out.d.begin());
  std::copy(b.d.begin(), b.d.end(), out.d.begin() + static_cast<std::ptrdiff_t>(a.d.size()));
  return out;
}

// Layer table derived from the config; parameter indices follow init_network.
struct Layout {
  std::vector<ConvLayer> backbone;
  ConvLayer detect_hidden;
  ConvLayer detect_out;
  ConvLayer pose_agg1;
  ConvLayer pose_agg2;
};

Layout layout_for(const ModelConfig& c) {
  Layout l;
  std::size_t idx = 0;
  int cin = 3;
  for (std::size_t b = 0; b < c.backbone_widths.size(); ++b) {
    l.backbone.push_back({idx, idx + 1, {cin, c.backbone_widths[b], 3, c.backbone_strides[b], 1}});
    idx += 2;
    cin = c.backbone_widths[b];
  }
  const int det_out = kAnchorsPerCell * (kBoxFields + c.cls);
  l.detect_hidden = {idx, idx + 1, {cin, c.detect_hidden, 3, 1, 1}};
  idx += 2;
  l.detect_out = {idx, idx + 1, {c.detect_hidden, det_out, 1, 1, 0}};
  idx += 2;
  l.pose_agg1 = {idx, idx + 1, {cin + c.detect_hidden, c.pose_hidden, 3, 1, 1}};
  idx += 2;
  l.pose_agg2 = {idx, idx + 1, {c.pose_hidden, kAnchorsPerCell * c.np, 3, 1, 1}};
  return l;
}

struct ForwardState {
  Feature input;
  std::vector<ConvCache> backbone;
  std::vector<Feature> backbone_out;  // post-activation
  ConvCache detect_hidden;
  Feature hidden;
  ConvCache detect_out;
  Feature det;
  ConvCache pose_agg1;
  Feature agg;
  ConvCache pose_agg2;
  Feature pose;
};

Feature input_feature(const Batch& batch) {
  Feature f(3, batch.count, batch.size, batch.size);
  const std::size_t plane = static_cast<std::size_t>(batch.size) * batch.size;
  for (int b = 0; b < batch.count; ++b) {
    for (int c = 0; c < 3; ++c) {
      std::copy_n(&batch.pixels[(static_cast<std::size_t>(b) * 3 + c) * plane], plane,
                  &f.d[(static_cast<std::size_t>(c) * batch.count + b) * plane]);
    }
  }
  return f;
}

void run_forward(const Model& m, const Layout& l, const Batch& batch, ForwardState& s) {
  if (batch.size != m.config.input_size) {
    throw InvalidArgument("forward: image size " + std::to_string(batch.size) +
                          " does not match model input size " + std::to_string(m.config.input_size));
  }
  if (batch.pixels.size() != static_cast<std::size_t>(batch.count) * 3 * batch.size * batch.size) {
    throw InvalidArgument("forward: batch payload does not match its shape");
  }
  s.input = input_feature(batch);
  s.backbone.resize(l.backbone.size());
  s.backbone_out.resize(l.backbone.size());
  const Feature* x = &s.input;
  for (std::size_t b = 0; b < l.backbone.size(); ++b) {
    s.backbone_out[b] = apply_silu(conv_forward(m, l.backbone[b], *x, s.backbone[b]));
    x = &s.backbone_out[b];
  }
  s.hidden = apply_silu(conv_forward(m, l.detect_hidden, *x, s.detect_hidden));
  s.det = conv_forward(m, l.detect_out, s.hidden, s.detect_out);
  s.agg = apply_silu(conv_forward(m, l.pose_agg1, concat(*x, s.hidden), s.pose_agg1));
  s.pose = conv_forward(m, l.pose_agg2, s.agg, s.pose_agg2);
}

GridTensor assemble(const ModelConfig& c, const ForwardState& s) {
  const int k = c.k;
  const int det_fields = kBoxFields + c.cls;
  const int fields = det_fields + c.np;
  GridTensor out(s.det.n, kAnchorsPerCell * fields, k);
  const std::size_t plane = static_cast<std::size_t>(k) * k;
  for (int b = 0; b < s.det.n; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int f = 0; f < fields; ++f) {
        const Feature& src = f < det_fields ? s.det : s.pose;
        const int row = f < det_fields ? a * det_fields + f : a * c.np + (f - det_fields);
        std::copy_n(&src.d[(static_cast<std::size_t>(row) * src.n + b) * plane], plane,
                    &out.data[out.index(b, a * fields + f, 0, 0)]);
      }
    }
  }
  return out;
}

// Splits a gradient over the raw output tensor into the two head outputs.
void disassemble(const ModelConfig& c, const std::vector<double>& graw, const GridTensor& shape,
                 Feature& ddet, Feature& dpose) {
  const int det_fields = kBoxFields + c.cls;
  const int fields = det_fields + c.np;
  const std::size_t plane = static_cast<std::size_t>(c.k) * c.k;
  for (int b = 0; b < shape.batch; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int f = 0; f < fields; ++f) {
        Feature& dst = f < det_fields ? ddet : dpose;
        const int row = f < det_fields ? a * det_fields + f : a * c.np + (f - det_fields);
        std::copy_n(&graw[shape.index(b, a * fields + f, 0, 0)], plane,
                    &dst.d[(static_cast<std::size_t>(row) * dst.n + b) * plane]);
      }
    }
  }
}

void check_finite(const LossBreakdown& l) {
  for (double v : {l.l_xy, l.l_wh, l.l_cls, l.l_obj, l.l_pose, l.total}) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss");
  }
}

}  // namespace

const char* to_string(Part p) {
  switch (p) {
    case Part::kBackbone:
      return "backbone";
    case Part::kDetectHead:
      return "detect_head";
    case Part::kPoseHead:
      return "pose_head";
  }
  return "?";
}

Part part_from_string(const std::string& s) {
  if (s == "backbone") return Part::kBackbone;
  if (s == "detect_head") return Part::kDetectHead;
  if (s == "pose_head") return Part::kPoseHead;
  throw InvalidArgument("unknown model part '" + s + "'");
}

void ModelConfig::validate() const {
  if (backbone_widths.empty() || backbone_widths.size() != backbone_strides.size()) {
    throw InvalidArgument("backbone widths and strides must be non-empty and of equal length");
  }
  for (int w : backbone_widths) {
    if (w < 1) throw InvalidArgument("backbone widths must be >= 1");
  }
  if (detect_hidden < 1 || pose_hidden < 1) throw InvalidArgument("head widths must be >= 1");
  channels_for(cls, np);
  if (input_size < 1 || k < 1) throw InvalidArgument("input_size and K must be >= 1");
  int size = input_size;
  for (int s : backbone_strides) {
    if (s < 1) throw InvalidArgument("strides must be >= 1");
    if (size % s != 0) {
      throw InvalidArgument("input_size " + std::to_string(input_size) +
                            " is not divisible by the backbone stride chain");
    }
    size /= s;
  }
  if (size != k) {
    throw InvalidArgument("backbone maps input_size " + std::to_string(input_size) + " to " +
                          std::to_string(size) + "x" + std::to_string(size) + ", expected K = " +
                          std::to_string(k));
  }
}

GridSpec ModelConfig::grid_spec(const std::array<Anchor, kAnchorsPerCell>& anchors) const {
  GridSpec s;
  s.k = k;
  s.anchors = anchors;
  s.cls = cls;
  s.np = np;
  s.box_activation = box_activation;
  s.validate();
  return s;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_size", c.input_size},
          {"k", c.k},
          {"backbone_widths", c.backbone_widths},
          {"backbone_strides", c.backbone_strides},
          {"detect_hidden", c.detect_hidden},
          {"pose_hidden", c.pose_hidden},
          {"cls", c.cls},
          {"np", c.np},
          {"box_activation", to_string(c.box_activation)},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "input_size") {
      c.input_size = value.get<int>();
    } else if (key == "k") {
      c.k = value.get<int>();
    } else if (key == "backbone_widths") {
      c.backbone_widths = value.get<std::vector<int>>();
    } else if (key == "backbone_strides") {
      c.backbone_strides = value.get<std::vector<int>>();
    } else if (key == "detect_hidden") {
      c.detect_hidden = value.get<int>();
    } else if (key == "pose_hidden") {
      c.pose_hidden = value.get<int>();
    } else if (key == "cls") {
      c.cls = value.get<int>();
    } else if (key == "np") {
      c.np = value.get<int>();
    } else if (key == "box_activation") {
      c.box_activation = box_activation_from_string(value.get<std::string>());
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else {
      throw InvalidArgument("unknown model config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

const Param& Model::param(const std::string& name) const {
  for (const Param& p : params) {
    if (p.name == name) return p;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

Param& Model::param(const std::string& name) {
  return const_cast<Param&>(static_cast<const Model&>(*this).param(name));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Param& p : params) n += p.value.size();
  return n;
}

std::vector<double> Model::flat() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const Param& p : params) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

void Model::set_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) throw InvalidArgument("set_flat: wrong parameter count");
  std::size_t off = 0;
  for (Param& p : params) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), p.value.size(), p.value.begin());
    off += p.value.size();
  }
}

Model init_network(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto add_conv = [&](const std::string& name, Part part, const ConvShape& s) {
    const int fan_in = s.cin * s.ksize * s.ksize;
    const double bound = std::sqrt(3.0 / fan_in);
    Param w{name + ".weight", part, {s.cout, s.cin, s.ksize, s.ksize}, {}};
    w.value.resize(static_cast<std::size_t>(s.cout) * fan_in);
    for (double& v : w.value) v = bound * unit(rng);
    Param b{name + ".bias", part, {s.cout}, std::vector<double>(static_cast<std::size_t>(s.cout), 0.0)};
    m.params.push_back(std::move(w));
    m.params.push_back(std::move(b));
  };
  const Layout l = layout_for(cfg);
  for (std::size_t b = 0; b < l.backbone.size(); ++b) {
    add_conv("backbone." + std::to_string(b), Part::kBackbone, l.backbone[b].shape);
  }
  add_conv("detect.hidden", Part::kDetectHead, l.detect_hidden.shape);
  add_conv("detect.out", Part::kDetectHead, l.detect_out.shape);
  add_conv("pose.agg1", Part::kPoseHead, l.pose_agg1.shape);
  add_conv("pose.agg2", Part::kPoseHead, l.pose_agg2.shape);
  return m;
}

Batch make_batch(const std::vector<const Image*>& images) {
  Batch b;
  b.count = static_cast<int>(images.size());
  if (images.empty()) return b;
  b.size = images.front()->size;
  b.pixels.reserve(images.size() * 3 * static_cast<std::size_t>(b.size) * b.size);
  for (const Image* img : images) {
    if (img->size != b.size) throw InvalidArgument("make_batch: images differ in size");
    for (std::uint8_t p : img->pixels) b.pixels.push_back(p / 255.0);
  }
  return b;
}

Batch make_batch(std::span<const Sample> samples) {
  std::vector<const Image*> images;
  images.reserve(samples.size());
  for (const Sample& s : samples) images.push_back(&s.image);
  return make_batch(images);
}

GridTensor forward(const Model& m, const Batch& batch) {
  const Layout l = layout_for(m.config);
  ForwardState s;
  run_forward(m, l, batch, s);
  return assemble(m.config, s);
}

LossBreakdown batch_loss(const Model& m, const Batch& batch, const BoxTargets& targets,
                         const LossWeights& w, const GridSpec& spec) {
  const GridTensor act = activate(forward(m, batch), spec);
  return multitask_loss(act, spec, targets, w);
}

LossBreakdown loss_and_gradient(const Model& m, const Batch& batch, const BoxTargets& targets,
                                const LossWeights& w, const GridSpec& spec, Gradients& grads,
                                bool backbone_grad) {
  const ModelConfig& c = m.config;
  if (spec.k != c.k || spec.cls != c.cls || spec.np != c.np) {
    throw InvalidArgument("grid spec does not match the model configuration");
  }
  const Layout l = layout_for(c);
  ForwardState s;
  run_forward(m, l, batch, s);
  const GridTensor raw = assemble(c, s);
  const GridTensor act = activate(raw, spec);
  std::vector<double> gact;
  const LossBreakdown loss = multitask_loss_grad(act, spec, targets, w, gact);

  // Chain through the output activations.
  const bool tanh_xy = spec.box_activation == BoxActivation::kTanh;
  const std::size_t plane = static_cast<std::size_t>(c.k) * c.k;
  for (int b = 0; b < raw.batch; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int f = 0; f < kBoxFields + c.cls; ++f) {
        if (f == 2 || f == 3) continue;
        const std::size_t base = raw.index(b, spec.channel(a, f), 0, 0);
        for (std::size_t q = 0; q < plane; ++q) {
          const double y = act.data[base + q];
          gact[base + q] *= (tanh_xy && f < 2) ? (1.0 - y * y) : y * (1.0 - y);
        }
      }
    }
  }

  grads.per_param.resize(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) grads.per_param[i].assign(m.params[i].value.size(), 0.0);

  Feature ddet(s.det.c, s.det.n, s.det.h, s.det.w);
  Feature dpose(s.pose.c, s.pose.n, s.pose.h, s.pose.w);
  disassemble(c, gact, raw, ddet, dpose);

  const Feature& top = s.backbone_out.back();
  Feature dagg(s.agg.c, s.agg.n, s.agg.h, s.agg.w);
  conv_backward(m, l.pose_agg2, s.pose_agg2, dpose, grads, &dagg);
  Feature dcat(top.c + s.hidden.c, top.n, top.h, top.w);
  conv_backward(m, l.pose_agg1, s.pose_agg1, silu_backward(dagg, s.pose_agg1.z), grads, &dcat);

  const std::size_t top_size = top.d.size();
  Feature dtop(top.c, top.n, top.h, top.w);
  std::copy_n(dcat.d.begin(), top_size, dtop.d.begin());
  Feature dhidden(s.hidden.c, s.hidden.n, s.hidden.h, s.hidden.w);
  std::copy(dcat.d.begin() + static_cast<std::ptrdiff_t>(top_size), dcat.d.end(), dhidden.d.begin());

  conv_backward(m, l.detect_out, s.detect_out, ddet, grads, &dhidden);
  conv_backward(m, l.detect_hidden, s.detect_hidden, silu_backward(dhidden, s.detect_hidden.z), grads,
                backbone_grad ? &dtop : nullptr);

  if (backbone_grad) {
    Feature dx = std::move(dtop);
    for (std::size_t bi = l.backbone.size(); bi-- > 0;) {
      const Feature dz = silu_backward(dx, s.backbone[bi].z);
      if (bi > 0) {
        const Feature& prev = s.backbone_out[bi - 1];
        Feature dprev(prev.c, prev.n, prev.h, prev.w);
        conv_backward(m, l.backbone[bi], s.backbone[bi], dz, grads, &dprev);
        dx = std::move(dprev);
      } else {
        conv_backward(m, l.backbone[bi], s.backbone[bi], dz, grads, nullptr);
      }
    }
  }
  return loss;
}

LossBreakdown train_step(Model& m, const Batch& batch, const BoxTargets& targets, const LossWeights& w,
                         const GridSpec& spec, double lr, const PartSet& frozen) {
  if (!std::isfinite(lr) || lr < 0.0) throw InvalidArgument("learning rate must be finite and >= 0");
  Gradients g;
  const bool backbone_grad = !frozen.contains(Part::kBackbone);
  const LossBreakdown loss = loss_and_gradient(m, batch, targets, w, spec, g, backbone_grad);
  check_finite(loss);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (frozen.contains(m.params[i].part)) continue;
    for (double v : g.per_param[i]) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + m.params[i].name);
    }
  }
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    Param& p = m.params[i];
    if (frozen.contains(p.part)) continue;
    for (std::size_t q = 0; q < p.value.size(); ++q) p.value[q] -= lr * g.per_param[i][q];
  }
  return loss;
}

void PhaseSchedule::validate() const {
  if (phases.size() != 3) throw InvalidArgument("a phase schedule has exactly three phases");
  for (const Phase& p : phases) {
    if (p.epochs < 0) throw InvalidArgument("phase epochs must be >= 0");
    if (p.batch_size < 1) throw InvalidArgument("phase batch_size must be >= 1");
    if (!std::isfinite(p.learning_rate) || p.learning_rate < 0.0) {
      throw InvalidArgument("phase learning_rate must be finite and >= 0");
    }
  }
}

PhaseSchedule PhaseSchedule::desk_default() {
  PhaseSchedule s;
  s.phases = {Phase{5, 8, 0.1, {Part::kBackbone, Part::kPoseHead}},
              Phase{15, 8, 0.1, {Part::kPoseHead}},
              Phase{25, 8, 0.05, {}}};
  return s;
}

nlohmann::json to_json(const PhaseSchedule& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Phase& p : s.phases) {
    nlohmann::json frozen = nlohmann::json::array();
    for (Part part : p.frozen) frozen.push_back(to_string(part));
    arr.push_back({{"epochs", p.epochs},
                   {"batch_size", p.batch_size},
                   {"learning_rate", p.learning_rate},
                   {"frozen", frozen}});
  }
  return arr;
}

PhaseSchedule schedule_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InvalidArgument("schedule must be an array of phases");
  PhaseSchedule s;
  for (const auto& pj : j) {
    Phase p;
    for (const auto& [key, value] : pj.items()) {
      if (key == "epochs") {
        p.epochs = value.get<int>();
      } else if (key == "batch_size") {
        p.batch_size = value.get<int>();
      } else if (key == "learning_rate") {
        p.learning_rate = value.get<double>();
      } else if (key == "frozen") {
        for (const auto& f : value) p.frozen.insert(part_from_string(f.get<std::string>()));
      } else {
        throw InvalidArgument("unknown phase key '" + key + "'");
      }
    }
    s.phases.push_back(p);
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const LossBreakdown& l) {
  return {{"l_xy", l.l_xy},         {"l_wh", l.l_wh},         {"l_cls", l.l_cls},
          {"l_obj", l.l_obj},       {"l_bbox", l.l_bbox},     {"l_vmse_x", l.l_vmse_x},
          {"l_vmse_y", l.l_vmse_y}, {"l_vmse_z", l.l_vmse_z}, {"l_ortho", l.l_ortho},
          {"l_pose", l.l_pose},     {"total", l.total}};
}

LossBreakdown loss_breakdown_from_json(const nlohmann::json& j) {
  LossBreakdown l;
  l.l_xy = j.at("l_xy").get<double>();
  l.l_wh = j.at("l_wh").get<double>();
  l.l_cls = j.at("l_cls").get<double>();
  l.l_obj = j.at("l_obj").get<double>();
  l.l_bbox = j.at("l_bbox").get<double>();
  l.l_vmse_x = j.at("l_vmse_x").get<double>();
  l.l_vmse_y = j.at("l_vmse_y").get<double>();
  l.l_vmse_z = j.at("l_vmse_z").get<double>();
  l.l_ortho = j.at("l_ortho").get<double>();
  l.l_pose = j.at("l_pose").get<double>();
  l.total = j.at("total").get<double>();
  return l;
}

nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json j = to_json(r.loss);
  j["phase"] = r.phase;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["learning_rate"] = r.learning_rate;
  return j;
}

void write_history(std::ostream& out, const TrainHistory& h) {
  for (const StepRecord& r : h.steps) out << to_json(r).dump() << '\n';
}

TrainResult train(const ModelConfig& cfg, const PhaseSchedule& schedule, const GridSpec& spec,
                  const LossWeights& w, std::span<const Sample> data, const PhaseCallback& on_phase_end) {
  schedule.validate();
  w.validate();
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  TrainResult result{init_network(cfg), {}};

  std::vector<BoxTargets> targets;
  targets.reserve(data.size());
  for (const Sample& s : data) targets.push_back(encode_targets(s.annotation, spec));

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  int step = 0;
  for (std::size_t pi = 0; pi < schedule.phases.size(); ++pi) {
    const Phase& phase = schedule.phases[pi];
    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(phase.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(phase.batch_size));
        std::vector<const Image*> images;
        BoxTargets bt(0, spec.k, spec.cls, spec.np);
        for (std::size_t q = start; q < end; ++q) {
          images.push_back(&data[order[q]].image);
          bt.append(targets[order[q]]);
        }
        LossBreakdown loss;
        try {
          loss = train_step(result.model, make_batch(images), bt, w, spec, phase.learning_rate, phase.frozen);
        } catch (const NumericError& e) {
          throw NumericError("phase " + std::to_string(pi + 1) + ", step " + std::to_string(step) + ": " +
                             e.what());
        }
        result.history.steps.push_back({static_cast<int>(pi), epoch, step, phase.learning_rate, loss});
        ++step;
      }
    }
    if (on_phase_end) on_phase_end(static_cast<int>(pi), result.model);
  }
  return result;
}

std::vector<ImagePredictions> predict(const Model& m, const GridSpec& spec, std::span<const Sample> data,
                                     double conf_threshold, double nms_threshold, int batch_size) {
  std::vector<ImagePredictions> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    const GridTensor act = activate(forward(m, make_batch(data.subspan(start, end - start))), spec);
    for (int b = 0; b < act.batch; ++b) {
      out.push_back({data[start + static_cast<std::size_t>(b)].annotation.image_id,
                     nms(decode(act, spec, conf_threshold, b), nms_threshold)});
    }
  }
  return out;
}

void save_model(const std::string& path, const Model& m) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const Param& p : m.params) {
    tensors.push_back({{"name", p.name}, {"part", to_string(p.part)}, {"shape", p.shape}});
  }
  const nlohmann::json header = {{"architecture", to_json(m.config)}, {"layout", "row-major"}, {"tensors", tensors}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_container(out, header, m.flat(), DType::kF64);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  Container c = read_container(in);
  try {
    Model m = init_network(model_config_from_json(c.header.at("architecture")));
    const auto& tensors = c.header.at("tensors");
    if (tensors.size() != m.params.size()) throw InvalidArgument("weight file tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (tensors[i].at("name").get<std::string>() != m.params[i].name ||
          tensors[i].at("shape").get<std::vector<int>>() != m.params[i].shape) {
        throw InvalidArgument("weight file entry " + std::to_string(i) + " does not match the architecture");
      }
    }
    m.set_flat(c.payload);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed weight file header: ") + e.what());
  }
}

}  // namespace mtnet
