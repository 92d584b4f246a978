#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "salgate/error.hpp"

namespace salgate {

/// Axis-aligned box in continuous pixel coordinates of the image frame.
/// Construction rejects non-finite coordinates and zero or negative extent.
class BoundingBox {
 public:
  BoundingBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x_min_ + x_max_); }
  double center_y() const noexcept { return 0.5 * (y_min_ + y_max_); }

  static BoundingBox from_center(double cx, double cy, double w, double h);

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x_min_, y_min_, x_max_, y_max_;
};

struct Detection {
  Detection(BoundingBox b, double s);

  BoundingBox box;
  double score;
};

/// Single-channel saliency grid, row-major, every value in [0,1].
class SaliencyMap {
 public:
  SaliencyMap(int width, int height, std::vector<float> values);
  SaliencyMap(int width, int height, float fill);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  float at(int x, int y) const { return values_[static_cast<size_t>(y) * width_ + x]; }
  std::span<const float> values() const noexcept { return values_; }

 private:
  int width_, height_;
  std::vector<float> values_;
};

/// 8-bit RGB image, interleaved row-major.
class ImageBuffer {
 public:
  ImageBuffer(int width, int height, uint8_t fill = 0);
  ImageBuffer(int width, int height, std::vector<uint8_t> rgb);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  static constexpr int channels() noexcept { return 3; }

  uint8_t at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  std::span<const uint8_t> data() const noexcept { return data_; }
  std::span<uint8_t> data() noexcept { return data_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width_ + x) * 3 + c;
  }
  int width_, height_;
  std::vector<uint8_t> data_;
};

double iou(const BoundingBox& a, const BoundingBox& b);

/// Intersects the box with [0,width]x[0,height]; nullopt when nothing remains.
std::optional<BoundingBox> clip_box(const BoundingBox& b, double width, double height);

/// Inclusive-exclusive pixel index range whose centers lie in a box.
struct PixelSpan {
  int x0, y0, x1, y1;
  bool empty() const noexcept { return x0 >= x1 || y0 >= y1; }
  long count() const noexcept { return empty() ? 0 : static_cast<long>(x1 - x0) * (y1 - y0); }
};

/// Pixels (i,j) with center (i+0.5, j+0.5) in the half-open box, limited to the frame.
PixelSpan covered_pixels(const BoundingBox& b, int width, int height);

/// Mean of map values over covered pixels. Throws EmptyRegion if none are covered.
double mean_saliency(const SaliencyMap& m, const BoundingBox& b);

}  // namespace salgate
