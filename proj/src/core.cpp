#include "salgate/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace salgate {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DegenerateTruth: return "DegenerateTruth";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MissingMasks: return "MissingMasks";
    case ErrorKind::UnknownImageId: return "UnknownImageId";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingImage: return "MissingImage";
    case ErrorKind::InvalidBox: return "InvalidBox";
    case ErrorKind::PlacementFailure: return "PlacementFailure";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

BoundingBox::BoundingBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    throw Error(ErrorKind::InvalidBox, "non-finite box coordinate");
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw Error(ErrorKind::InvalidBox, "box has zero or negative extent");
  }
}

BoundingBox BoundingBox::from_center(double cx, double cy, double w, double h) {
  return BoundingBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
}

Detection::Detection(BoundingBox b, double s) : box(b), score(s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "detection score outside [0,1]");
  }
}

SaliencyMap::SaliencyMap(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "saliency map dimensions must be positive");
  }
  if (values_.size() != static_cast<size_t>(width) * height) {
    throw Error(ErrorKind::ShapeMismatch, "saliency value count != width*height");
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw Error(ErrorKind::InvalidArgument, "saliency value outside [0,1]");
    }
  }
}

SaliencyMap::SaliencyMap(int width, int height, float fill)
    : SaliencyMap(width, height,
                  std::vector<float>(static_cast<size_t>(std::max(width, 0)) *
                                         static_cast<size_t>(std::max(height, 0)),
                                     fill)) {}

ImageBuffer::ImageBuffer(int width, int height, uint8_t fill)
    : ImageBuffer(width, height,
                  std::vector<uint8_t>(static_cast<size_t>(std::max(width, 0)) *
                                           static_cast<size_t>(std::max(height, 0)) * 3,
                                       fill)) {}

ImageBuffer::ImageBuffer(int width, int height, std::vector<uint8_t> rgb)
    : width_(width), height_(height), data_(std::move(rgb)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
  }
  if (data_.size() != static_cast<size_t>(width) * height * 3) {
    throw Error(ErrorKind::ShapeMismatch, "image byte count != width*height*3");
  }
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::optional<BoundingBox> clip_box(const BoundingBox& b, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "clip frame must have positive size");
  }
  const double x0 = std::max(b.x_min(), 0.0);
  const double y0 = std::max(b.y_min(), 0.0);
  const double x1 = std::min(b.x_max(), width);
  const double y1 = std::min(b.y_max(), height);
  if (!(x0 < x1) || !(y0 < y1)) return std::nullopt;
  return BoundingBox(x0, y0, x1, y1);
}

PixelSpan covered_pixels(const BoundingBox& b, int width, int height) {
  // center i+0.5 in [lo,hi)  <=>  ceil(lo-0.5) <= i < ceil(hi-0.5)
  auto first = [](double lo, int limit) {
    return static_cast<int>(std::clamp(std::ceil(lo - 0.5), 0.0, static_cast<double>(limit)));
  };
  return PixelSpan{first(b.x_min(), width), first(b.y_min(), height), first(b.x_max(), width),
                   first(b.y_max(), height)};
}

double mean_saliency(const SaliencyMap& m, const BoundingBox& b) {
  const PixelSpan span = covered_pixels(b, m.width(), m.height());
  if (span.empty()) {
    throw Error(ErrorKind::EmptyRegion, "box covers no pixel centers of the saliency map");
  }
  double sum = 0.0;
  float lo = 1.0f, hi = 0.0f;
  for (int y = span.y0; y < span.y1; ++y) {
    for (int x = span.x0; x < span.x1; ++x) {
      const float v = m.at(x, y);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  // rounding in the sum must not push the mean outside the covered range
  return std::clamp(sum / static_cast<double>(span.count()), static_cast<double>(lo),
                    static_cast<double>(hi));
}

}  // namespace salgate
