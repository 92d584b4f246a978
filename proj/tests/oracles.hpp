#pragma once

// Brute-force reference implementations. They follow the textbook definitions
// literally and share no code with the library beyond the value types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "salgate/core.hpp"

namespace oracle {

using salgate::BoundingBox;
using salgate::Detection;

inline double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min()));
  const double iy = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min()));
  const double inter = ix * iy;
  const double uni = (a.x_max() - a.x_min()) * (a.y_max() - a.y_min()) +
                     (b.x_max() - b.x_min()) * (b.y_max() - b.y_min()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Average over every pixel whose center lies in [x_min,x_max) x [y_min,y_max).
inline std::optional<double> mean_saliency(const salgate::SaliencyMap& m, const BoundingBox& b) {
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      if (cx >= b.x_min() && cx < b.x_max() && cy >= b.y_min() && cy < b.y_max()) {
        sum += m.at(x, y);
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// True when a should be visited before b: higher score, then smaller x_min, then smaller y_min.
inline bool nms_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box.x_min() != b.box.x_min()) return a.box.x_min() < b.box.x_min();
  return a.box.y_min() < b.box.y_min();
}

/// Repeatedly take the best remaining candidate and delete everything overlapping it.
inline std::vector<Detection> nms(std::vector<Detection> pool, double threshold) {
  std::vector<Detection> kept;
  while (!pool.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < pool.size(); ++i) {
      if (nms_before(pool[i], pool[best])) best = i;
    }
    const Detection top = pool[best];
    pool.erase(pool.begin() + static_cast<long>(best));
    kept.push_back(top);
    std::vector<Detection> rest;
    for (const auto& d : pool) {
      if (box_iou(d.box, top.box) < threshold) rest.push_back(d);
    }
    pool = std::move(rest);
  }
  return kept;
}

struct Match {
  int truth = -1;
  bool tp = false;
};

/// Visits detections in descending score (input order on ties); each takes its
/// best-IoU unmatched truth (lowest index on ties) and is a TP iff IoU >= threshold.
inline std::vector<Match> match(const std::vector<Detection>& dets, const std::vector<BoundingBox>& truths,
                                double threshold) {
  std::vector<Match> out(dets.size());
  std::vector<bool> visited(dets.size(), false), used(truths.size(), false);
  for (size_t round = 0; round < dets.size(); ++round) {
    int next = -1;
    for (size_t i = 0; i < dets.size(); ++i) {
      if (visited[i]) continue;
      if (next < 0 || dets[i].score > dets[static_cast<size_t>(next)].score) next = static_cast<int>(i);
    }
    visited[static_cast<size_t>(next)] = true;
    int best = -1;
    double best_iou = 0.0;
    for (size_t t = 0; t < truths.size(); ++t) {
      if (used[t]) continue;
      const double v = box_iou(dets[static_cast<size_t>(next)].box, truths[t]);
      if (best < 0 || v > best_iou) {
        best = static_cast<int>(t);
        best_iou = v;
      }
    }
    if (best >= 0 && best_iou >= threshold) {
      used[static_cast<size_t>(best)] = true;
      out[static_cast<size_t>(next)] = {best, true};
    }
  }
  return out;
}

/// All-point AP: sum over ranks of (recall step) x (max precision at any rank at or after it).
inline double average_precision(const std::vector<bool>& labels, int total_truths) {
  if (total_truths == 0) return labels.empty() ? 1.0 : 0.0;
  const size_t n = labels.size();
  std::vector<double> prec(n), rec(n);
  int tp = 0;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i]) ++tp;
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp) / total_truths;
  }
  double ap = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double step = rec[i] - (i == 0 ? 0.0 : rec[i - 1]);
    if (step == 0.0) continue;
    double envelope = 0.0;
    for (size_t j = i; j < n; ++j) envelope = std::max(envelope, prec[j]);
    ap += step * envelope;
  }
  return ap;
}

/// Pads by mirroring without repeating the edge (dcba|abcd -> cb|abcd|cb), built one fold at a time.
inline int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

/// Direct 2-D Gaussian convolution with an outer-product kernel; values before rounding.
inline std::vector<double> blur(const salgate::ImageBuffer& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k1(2 * static_cast<size_t>(r) + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += (k1[static_cast<size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma)));
  for (double& v : k1) v /= sum;
  const int w = img.width(), h = img.height();
  std::vector<double> out(static_cast<size_t>(w) * h * 3, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += k1[static_cast<size_t>(dy + r)] * k1[static_cast<size_t>(dx + r)] *
                   img.at(mirror(x + dx, w), mirror(y + dy, h), c);
        out[(static_cast<size_t>(y) * w + x) * 3 + c] = acc;
      }
  return out;
}

inline uint8_t to_byte(double v) {
  const double r = std::round(v);  // ties away from zero; non-negative values make this floor(v + 0.5)
  return static_cast<uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
}

// ---- random fixtures ----

inline BoundingBox random_box(std::mt19937_64& rng, double extent, double min_side = 1.0, double max_side = -1.0) {
  if (max_side <= 0.0) max_side = extent / 2.0;
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> px(0.0, extent - w), py(0.0, extent - h);
  const double x = px(rng), y = py(rng);
  return BoundingBox(x, y, x + w, y + h);
}

/// Integer-aligned boxes make IoU ties and exact duplicates common.
inline BoundingBox random_grid_box(std::mt19937_64& rng, int extent, int max_side) {
  std::uniform_int_distribution<int> side(1, max_side);
  const int w = side(rng), h = side(rng);
  std::uniform_int_distribution<int> px(0, extent - w), py(0, extent - h);
  const int x = px(rng), y = py(rng);
  return BoundingBox(x, y, x + w, y + h);
}

inline double random_score(std::mt19937_64& rng, bool coarse) {
  if (coarse) return std::uniform_int_distribution<int>(0, 4)(rng) / 4.0;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline salgate::SaliencyMap random_map(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<size_t>(w) * h);
  for (float& x : v) x = u(rng);
  return salgate::SaliencyMap(w, h, std::move(v));
}

inline salgate::ImageBuffer random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<uint8_t> v(static_cast<size_t>(w) * h * 3);
  for (auto& x : v) x = static_cast<uint8_t>(u(rng));
  return salgate::ImageBuffer(w, h, std::move(v));
}

}  // namespace oracle
