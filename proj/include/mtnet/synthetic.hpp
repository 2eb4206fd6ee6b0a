#pragma once

// Synthetic stand-in for annotated face images: each image holds 1-3 filled
// triangle markers with a white tip. The tip direction in the image is the
// roll angle (0 = pointing up, clockwise positive) and the body color encodes
// yaw and pitch: RGB = (0.5 + 0.4 cos yaw, 0.5 + 0.4 sin yaw, 0.5 + 0.4 pitch / 90).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtnet/gridcodec.hpp"

namespace mtnet {

/// 8-bit RGB image, channel-major (CHW).
struct Image {
  int size = 0;
  std::vector<std::uint8_t> pixels;

  [[nodiscard]] std::uint8_t at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * size + y) * size + x];
  }
};

struct Sample {
  Image image;
  Annotation annotation;
};

struct SyntheticConfig {
  int image_size = 56;
  int min_markers = 1;
  int max_markers = 3;
  double min_radius = 0.10;  // circumradius as a fraction of the image side
  double max_radius = 0.25;
  double yaw_limit = 179.0;
  double pitch_limit = 60.0;
  double roll_limit = 60.0;
  double background_max = 0.15;
  double noise_sigma = 0.02;
  int supersample = 4;

  void validate() const;
};

/// Deterministic in (n, seed, config). Image ids are "<seed>-<index>".
std::vector<Sample> gen_synthetic(int n, std::uint64_t seed, const SyntheticConfig& config = {});

/// Body color in [0, 1] for a marker pose.
std::array<double, 3> marker_color(const EulerAngles& pose);

/// Writes the image as binary PPM (P6).
void write_ppm(const std::string& path, const Image& image);

}  // namespace mtnet
