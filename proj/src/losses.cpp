#include "mtnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtnet/errors.hpp"

namespace mtnet {

void LossWeights::validate() const {
  for (double l : {lambda_xy, lambda_wh, lambda_cls, lambda_obj}) {
    if (!std::isfinite(l) || l < 0.0) throw InvalidArgument("loss weights must be finite and >= 0");
  }
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0) {
    throw InvalidArgument("alpha must lie in [0, 1]");
  }
}

BoxTargets::BoxTargets(int batch_, int k_, int cls_, int np_)
    : batch(batch_), k(k_), cls(cls_), np(np_) {
  const std::size_t n = static_cast<std::size_t>(batch_) * kAnchorsPerCell * k_ * k_;
  obj.assign(n, ObjTarget::kNegative);
  tx.assign(n, 0.0);
  ty.assign(n, 0.0);
  tw.assign(n, 0.0);
  th.assign(n, 0.0);
  class_id.assign(n, 0);
  pose.assign(n * static_cast<std::size_t>(np_), 0.0);
}

int BoxTargets::positives() const {
  return static_cast<int>(std::count(obj.begin(), obj.end(), ObjTarget::kPositive));
}

void BoxTargets::append(const BoxTargets& o) {
  if (o.k != k || o.cls != cls || o.np != np) throw InvalidArgument("BoxTargets::append: shape mismatch");
  batch += o.batch;
  obj.insert(obj.end(), o.obj.begin(), o.obj.end());
  tx.insert(tx.end(), o.tx.begin(), o.tx.end());
  ty.insert(ty.end(), o.ty.begin(), o.ty.end());
  tw.insert(tw.end(), o.tw.begin(), o.tw.end());
  th.insert(th.end(), o.th.begin(), o.th.end());
  class_id.insert(class_id.end(), o.class_id.begin(), o.class_id.end());
  pose.insert(pose.end(), o.pose.begin(), o.pose.end());
}

double vector_mse(const Vector3& pred, const Vector3& truth) { return (pred - truth).squaredNorm(); }

double ortho_loss(const PoseVectors& p) {
  const double d12 = p.v1.dot(p.v2);
  const double d13 = p.v1.dot(p.v3);
  const double d23 = p.v2.dot(p.v3);
  return d12 * d12 + d13 * d13 + d23 * d23;
}

double pose_loss(const PoseVectors& pred, const PoseVectors& truth) {
  return vector_mse(pred.v1, truth.v1) + vector_mse(pred.v2, truth.v2) +
         vector_mse(pred.v3, truth.v3) + ortho_loss(pred);
}

PoseVectors pose_loss_grad(const PoseVectors& pred, const PoseVectors& truth) {
  const double d12 = pred.v1.dot(pred.v2);
  const double d13 = pred.v1.dot(pred.v3);
  const double d23 = pred.v2.dot(pred.v3);
  PoseVectors g;
  g.v1 = 2.0 * (pred.v1 - truth.v1) + 2.0 * (d12 * pred.v2 + d13 * pred.v3);
  g.v2 = 2.0 * (pred.v2 - truth.v2) + 2.0 * (d12 * pred.v1 + d23 * pred.v3);
  g.v3 = 2.0 * (pred.v3 - truth.v3) + 2.0 * (d13 * pred.v1 + d23 * pred.v2);
  return g;
}

double total_loss(double l_bbox, double l_pose, double alpha) {
  return alpha * l_bbox + (1.0 - alpha) * l_pose;
}

double bce(double p, double target) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

double bce_grad(double p, double target) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return -target / p + (1.0 - target) / (1.0 - p);
}

namespace {

void check_shapes(const GridTensor& act, const GridSpec& spec, const BoxTargets& t) {
  act.check_matches(spec);
  if (t.batch != act.batch || t.k != spec.k || t.cls != spec.cls || t.np != spec.np ||
      t.slots() != static_cast<std::size_t>(act.batch) * kAnchorsPerCell * spec.k * spec.k) {
    throw InvalidArgument("targets do not match the tensor/grid shape");
  }
}

// Shared evaluation; gradient is written only when `grad` is non-null.
LossBreakdown evaluate(const GridTensor& act, const GridSpec& spec, const BoxTargets& t,
                       const LossWeights& w, bool with_bbox, bool with_pose,
                       std::vector<double>* grad) {
  check_shapes(act, spec, t);
  if (!act.activated) throw StateError("losses expect an activated tensor");
  w.validate();
  if (grad != nullptr) grad->assign(act.size(), 0.0);

  const int k = spec.k;
  const bool tanh_xy = spec.box_activation == BoxActivation::kTanh;
  const double xy_scale = tanh_xy ? 0.5 : 1.0;  // d offset / d activated value
  const int pos = t.positives();
  int valid = 0;
  for (ObjTarget o : t.obj) valid += o != ObjTarget::kIgnore ? 1 : 0;
  const double inv_pos = pos > 0 ? 1.0 / pos : 0.0;
  const double inv_valid = valid > 0 ? 1.0 / valid : 0.0;

  // Weights applied to each raw term's gradient inside the total.
  const double a_box = w.alpha;
  const double a_pose = 1.0 - w.alpha;

  LossBreakdown out;
  for (int b = 0; b < act.batch; ++b) {
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const std::size_t s = t.slot(b, a, i, j);
          const ObjTarget o = t.obj[s];
          auto idx = [&](int field) { return act.index(b, spec.channel(a, field), i, j); };
          if (with_bbox && o != ObjTarget::kIgnore) {
            const double p = act.data[idx(4)];
            const double target = o == ObjTarget::kPositive ? 1.0 : 0.0;
            out.l_obj += bce(p, target) * inv_valid;
            if (grad) (*grad)[idx(4)] += a_box * w.lambda_obj * bce_grad(p, target) * inv_valid;
          }
          if (o != ObjTarget::kPositive) continue;
          if (with_bbox) {
            const double targets_xy[2] = {t.tx[s], t.ty[s]};
            for (int f = 0; f < 2; ++f) {
              const double v = act.data[idx(f)];
              const double off = tanh_xy ? 0.5 * (v + 1.0) : v;
              const double d = off - targets_xy[f];
              out.l_xy += d * d * inv_pos;
              if (grad) (*grad)[idx(f)] += a_box * w.lambda_xy * 2.0 * d * xy_scale * inv_pos;
            }
            const double targets_wh[2] = {t.tw[s], t.th[s]};
            for (int f = 0; f < 2; ++f) {
              const double d = act.data[idx(2 + f)] - targets_wh[f];
              out.l_wh += d * d * inv_pos;
              if (grad) (*grad)[idx(2 + f)] += a_box * w.lambda_wh * 2.0 * d * inv_pos;
            }
            for (int c = 0; c < spec.cls; ++c) {
              const double p = act.data[idx(kBoxFields + c)];
              const double target = t.class_id[s] == c ? 1.0 : 0.0;
              out.l_cls += bce(p, target) * inv_pos;
              if (grad) {
                (*grad)[idx(kBoxFields + c)] += a_box * w.lambda_cls * bce_grad(p, target) * inv_pos;
              }
            }
          }
          if (with_pose) {
            const int off = spec.pose_offset();
            const double* truth = &t.pose[s * static_cast<std::size_t>(spec.np)];
            if (spec.np == 9) {
              std::array<double, 9> pf{};
              std::array<double, 9> tf{};
              for (int q = 0; q < 9; ++q) {
                pf[q] = act.data[idx(off + q)];
                tf[q] = truth[q];
              }
              const PoseVectors pred = PoseVectors::from_flat(pf);
              const PoseVectors tru = PoseVectors::from_flat(tf);
              out.l_vmse_x += vector_mse(pred.v1, tru.v1) * inv_pos;
              out.l_vmse_y += vector_mse(pred.v2, tru.v2) * inv_pos;
              out.l_vmse_z += vector_mse(pred.v3, tru.v3) * inv_pos;
              out.l_ortho += ortho_loss(pred) * inv_pos;
              if (grad) {
                const std::array<double, 9> g = pose_loss_grad(pred, tru).flat();
                for (int q = 0; q < 9; ++q) (*grad)[idx(off + q)] += a_pose * g[q] * inv_pos;
              }
            } else {
              double* comps[3] = {&out.l_vmse_x, &out.l_vmse_y, &out.l_vmse_z};
              for (int q = 0; q < 3; ++q) {
                const double d = act.data[idx(off + q)] - truth[q];
                *comps[q] += d * d * inv_pos;
                if (grad) (*grad)[idx(off + q)] += a_pose * 2.0 * d * inv_pos;
              }
            }
          }
        }
      }
    }
  }
  out.l_bbox = w.lambda_xy * out.l_xy + w.lambda_wh * out.l_wh + w.lambda_cls * out.l_cls +
               w.lambda_obj * out.l_obj;
  out.l_pose = out.l_vmse_x + out.l_vmse_y + out.l_vmse_z + out.l_ortho;
  out.total = total_loss(out.l_bbox, out.l_pose, w.alpha);
  return out;
}

}  // namespace

LossBreakdown bbox_loss(const GridTensor& act, const GridSpec& spec, const BoxTargets& targets,
                        const LossWeights& w) {
  LossBreakdown out = evaluate(act, spec, targets, w, true, false, nullptr);
  out.total = 0.0;
  return out;
}

LossBreakdown pose_branch_loss(const GridTensor& act, const GridSpec& spec,
                               const BoxTargets& targets) {
  LossBreakdown out = evaluate(act, spec, targets, LossWeights{}, false, true, nullptr);
  out.total = 0.0;
  return out;
}

LossBreakdown multitask_loss(const GridTensor& act, const GridSpec& spec, const BoxTargets& targets,
                             const LossWeights& w) {
  return evaluate(act, spec, targets, w, true, true, nullptr);
}

LossBreakdown multitask_loss_grad(const GridTensor& act, const GridSpec& spec,
                                  const BoxTargets& targets, const LossWeights& w,
                                  std::vector<double>& grad) {
  return evaluate(act, spec, targets, w, true, true, &grad);
}

double grad_check(const ScalarFunction& f, std::span<const double> analytic,
                  std::span<const double> point, double step, std::vector<double>& numeric) {
  if (analytic.size() != point.size()) throw InvalidArgument("grad_check: gradient/point size mismatch");
  if (!(step > 0.0)) throw InvalidArgument("grad_check: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  numeric.assign(x.size(), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite function value at coordinate " + std::to_string(i));
    }
    numeric[i] = (fp - fm) / (2.0 * step);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric[i]) / std::max(1e-8, std::abs(a) + std::abs(numeric[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

double grad_check(const ScalarFunction& f, std::span<const double> analytic,
                  std::span<const double> point, double step) {
  std::vector<double> numeric;
  return grad_check(f, analytic, point, step, numeric);
}

}  // namespace mtnet
