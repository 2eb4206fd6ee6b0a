#pragma once

// Joint detection + pose grid tensor layout.
//
// A tensor has shape (batch, channels, K, K) in row-major order with
// channels = 3 * (5 + cls + np). Channels are grouped per anchor; inside an
// anchor group the order is
//   [tx, ty, tw, th, objectness, class_0 .. class_{cls-1}, pose_0 .. pose_{np-1}].

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mtnet {

enum class BoxActivation { kSigmoid, kTanh };

const char* to_string(BoxActivation a);
BoxActivation box_activation_from_string(const std::string& s);

struct Anchor {
  double w = 0.0;
  double h = 0.0;
};

inline constexpr int kAnchorsPerCell = 3;
inline constexpr int kBoxFields = 5;

std::array<Anchor, kAnchorsPerCell> default_anchors();

/// 3 * (5 + cls + np). Throws InvalidArgument unless cls >= 1 and np is 3 or 9.
int channels_for(int cls, int np);

struct GridSpec {
  int k = 7;
  std::array<Anchor, kAnchorsPerCell> anchors = default_anchors();
  int cls = 1;
  int np = 9;
  BoxActivation box_activation = BoxActivation::kSigmoid;

  /// Throws InvalidArgument on K < 1, bad cls/np, or non-positive anchors.
  void validate() const;
  [[nodiscard]] int fields_per_anchor() const { return kBoxFields + cls + np; }
  [[nodiscard]] int channels() const { return channels_for(cls, np); }
  [[nodiscard]] int pose_offset() const { return kBoxFields + cls; }
  [[nodiscard]] int channel(int anchor, int field) const { return anchor * fields_per_anchor() + field; }
};

struct GridTensor {
  int batch = 0;
  int channels = 0;
  int k = 0;
  std::vector<double> data;
  bool activated = false;

  GridTensor() = default;
  GridTensor(int batch, int channels, int k);

  [[nodiscard]] std::size_t index(int b, int c, int i, int j) const {
    return ((static_cast<std::size_t>(b) * channels + c) * k + i) * k + j;
  }
  double& at(int b, int c, int i, int j) { return data[index(b, c, i, j)]; }
  [[nodiscard]] double at(int b, int c, int i, int j) const { return data[index(b, c, i, j)]; }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  /// Throws InvalidArgument if the tensor shape does not match the spec.
  void check_matches(const GridSpec& spec) const;
};

}  // namespace mtnet
