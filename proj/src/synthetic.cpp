#include "mtnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "mtnet/errors.hpp"

namespace mtnet {

namespace {

constexpr double kBaseVertexAngle = 140.0 * std::numbers::pi / 180.0;
// Samples farther than this fraction of the circumradius toward the apex belong to the tip.
constexpr double kTipStart = 0.35;
constexpr int kPlacementAttempts = 100;

struct Vertex {
  double x, y;
};

double edge(const Vertex& a, const Vertex& b, double x, double y) {
  return (x - a.x) * (b.y - a.y) - (y - a.y) * (b.x - a.x);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (image_size < 8) throw InvalidArgument("synthetic image_size must be >= 8");
  if (min_markers < 1 || max_markers < min_markers) throw InvalidArgument("bad marker count range");
  if (!(min_radius > 0.0) || max_radius < min_radius || max_radius > 0.5) {
    throw InvalidArgument("marker radius range must satisfy 0 < min <= max <= 0.5");
  }
  if (yaw_limit < 0.0 || yaw_limit > 180.0 || pitch_limit < 0.0 || pitch_limit > 90.0 ||
      roll_limit < 0.0 || roll_limit > 90.0) {
    throw InvalidArgument("angle limits must satisfy yaw <= 180, pitch <= 90, roll <= 90");
  }
  if (supersample < 1) throw InvalidArgument("supersample must be >= 1");
}

std::array<double, 3> marker_color(const EulerAngles& pose) {
  const double y = pose.yaw * std::numbers::pi / 180.0;
  return {0.5 + 0.4 * std::cos(y), 0.5 + 0.4 * std::sin(y), 0.5 + 0.4 * pose.pitch / 90.0};
}

std::vector<Sample> gen_synthetic(int n, std::uint64_t seed, const SyntheticConfig& cfg) {
  if (n < 1) throw InvalidArgument("gen_synthetic: n must be >= 1");
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int s = cfg.image_size;
  const double ss = cfg.supersample;
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> canvas(static_cast<std::size_t>(3) * s * s);

  for (int idx = 0; idx < n; ++idx) {
    Sample sample;
    sample.annotation.image_id = std::to_string(seed) + "-" + std::to_string(idx);
    for (int c = 0; c < 3; ++c) {
      const double level = uniform(0.0, cfg.background_max);
      for (int p = 0; p < s * s; ++p) {
        canvas[static_cast<std::size_t>(c) * s * s + p] =
            level + (cfg.noise_sigma > 0.0 ? noise(rng) : 0.0);
      }
    }

    const int wanted = cfg.min_markers + static_cast<int>(unit(rng) * (cfg.max_markers - cfg.min_markers + 1));
    for (int attempt = 0; attempt < kPlacementAttempts &&
                          static_cast<int>(sample.annotation.objects.size()) < std::min(wanted, cfg.max_markers);
         ++attempt) {
      const double rho = uniform(cfg.min_radius, cfg.max_radius) * s;
      const double cx = uniform(rho, s - rho);
      const double cy = uniform(rho, s - rho);
      const EulerAngles pose{uniform(-cfg.yaw_limit, cfg.yaw_limit),
                             uniform(-cfg.pitch_limit, cfg.pitch_limit),
                             uniform(-cfg.roll_limit, cfg.roll_limit)};
      const double theta = pose.roll * std::numbers::pi / 180.0;
      const std::array<Vertex, 3> v{
          Vertex{cx + rho * std::sin(theta), cy - rho * std::cos(theta)},
          Vertex{cx + rho * std::sin(theta + kBaseVertexAngle), cy - rho * std::cos(theta + kBaseVertexAngle)},
          Vertex{cx + rho * std::sin(theta - kBaseVertexAngle), cy - rho * std::cos(theta - kBaseVertexAngle)}};
      const double x0 = std::min({v[0].x, v[1].x, v[2].x});
      const double x1 = std::max({v[0].x, v[1].x, v[2].x});
      const double y0 = std::min({v[0].y, v[1].y, v[2].y});
      const double y1 = std::max({v[0].y, v[1].y, v[2].y});
      const Box box = Box::from_corners(x0 / s, y0 / s, x1 / s, y1 / s);

      // Keep boxes at least one pixel apart.
      const double gap = 1.0 / s;
      const bool overlaps = std::any_of(
          sample.annotation.objects.begin(), sample.annotation.objects.end(), [&](const GroundTruth& g) {
            return std::abs(g.box.cx - box.cx) * 2.0 < g.box.w + box.w + 2.0 * gap &&
                   std::abs(g.box.cy - box.cy) * 2.0 < g.box.h + box.h + 2.0 * gap;
          });
      if (overlaps) continue;

      const std::array<double, 3> body = marker_color(pose);
      const double dir_x = std::sin(theta);
      const double dir_y = -std::cos(theta);
      const int px0 = std::max(0, static_cast<int>(std::floor(x0)));
      const int px1 = std::min(s - 1, static_cast<int>(std::floor(x1)));
      const int py0 = std::max(0, static_cast<int>(std::floor(y0)));
      const int py1 = std::min(s - 1, static_cast<int>(std::floor(y1)));
      for (int py = py0; py <= py1; ++py) {
        for (int px = px0; px <= px1; ++px) {
          int body_hits = 0;
          int tip_hits = 0;
          for (int sy = 0; sy < cfg.supersample; ++sy) {
            for (int sx = 0; sx < cfg.supersample; ++sx) {
              const double x = px + (sx + 0.5) / ss;
              const double y = py + (sy + 0.5) / ss;
              const double e0 = edge(v[0], v[1], x, y);
              const double e1 = edge(v[1], v[2], x, y);
              const double e2 = edge(v[2], v[0], x, y);
              const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
              if (!inside) continue;
              if ((x - cx) * dir_x + (y - cy) * dir_y > kTipStart * rho) {
                ++tip_hits;
              } else {
                ++body_hits;
              }
            }
          }
          if (body_hits + tip_hits == 0) continue;
          const double total = ss * ss;
          const double wb = body_hits / total;
          const double wt = tip_hits / total;
          for (int c = 0; c < 3; ++c) {
            double& px_val = canvas[(static_cast<std::size_t>(c) * s + py) * s + px];
            px_val = (1.0 - wb - wt) * px_val + wb * body[c] + wt * 1.0;
          }
        }
      }
      sample.annotation.objects.push_back({box, pose});
    }

    sample.image.size = s;
    sample.image.pixels.resize(canvas.size());
    for (std::size_t p = 0; p < canvas.size(); ++p) {
      sample.image.pixels[p] = static_cast<std::uint8_t>(std::lround(std::clamp(canvas[p], 0.0, 1.0) * 255.0));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

void write_ppm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << "P6\n" << image.size << ' ' << image.size << "\n255\n";
  for (int y = 0; y < image.size; ++y) {
    for (int x = 0; x < image.size; ++x) {
      for (int c = 0; c < 3; ++c) out.put(static_cast<char>(image.at(c, y, x)));
    }
  }
}

}  // namespace mtnet
