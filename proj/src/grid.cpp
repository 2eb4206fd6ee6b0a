#include "mtnet/grid.hpp"

#include <cmath>
#include <string>

#include "mtnet/errors.hpp"

namespace mtnet {

const char* to_string(BoxActivation a) {
  return a == BoxActivation::kTanh ? "tanh-normalized" : "sigmoid-conf";
}

BoxActivation box_activation_from_string(const std::string& s) {
  if (s == "sigmoid-conf" || s == "sigmoid") return BoxActivation::kSigmoid;
  if (s == "tanh-normalized" || s == "tanh") return BoxActivation::kTanh;
  throw InvalidArgument("unknown box activation '" + s + "'");
}

std::array<Anchor, kAnchorsPerCell> default_anchors() {
  return {Anchor{0.1, 0.14}, Anchor{0.27, 0.36}, Anchor{0.6, 0.78}};
}

int channels_for(int cls, int np) {
  if (cls < 1) throw InvalidArgument("class count must be >= 1");
  if (np != 3 && np != 9) throw InvalidArgument("pose parameter count must be 3 or 9");
  return kAnchorsPerCell * (kBoxFields + cls + np);
}

void GridSpec::validate() const {
  if (k < 1) throw InvalidArgument("grid size K must be >= 1");
  channels_for(cls, np);
  for (const Anchor& a : anchors) {
    if (!(a.w > 0.0) || !(a.h > 0.0) || !std::isfinite(a.w) || !std::isfinite(a.h)) {
      throw InvalidArgument("anchor sizes must be positive and finite");
    }
  }
}

GridTensor::GridTensor(int batch_, int channels_, int k_)
    : batch(batch_), channels(channels_), k(k_) {
  if (batch_ < 0 || channels_ < 0 || k_ < 0) throw InvalidArgument("negative tensor dimension");
  data.assign(static_cast<std::size_t>(batch_) * channels_ * k_ * k_, 0.0);
}

void GridTensor::check_matches(const GridSpec& spec) const {
  if (channels != spec.channels() || k != spec.k) {
    throw InvalidArgument("tensor shape (" + std::to_string(channels) + ", " + std::to_string(k) +
                          ", " + std::to_string(k) + ") does not match grid spec (" +
                          std::to_string(spec.channels()) + ", " + std::to_string(spec.k) + ", " +
                          std::to_string(spec.k) + ")");
  }
  if (data.size() != static_cast<std::size_t>(batch) * channels * k * k) {
    throw InvalidArgument("tensor payload size does not match its shape");
  }
}

}  // namespace mtnet
