#include "salgate/obfuscate.hpp"

#include <algorithm>
#include <cmath>

namespace salgate {

int ObfuscationConfig::kernel_radius() const {
  return static_cast<int>(std::ceil(3.0 * blur_sigma));
}

void ObfuscationConfig::validate() const {
  if (!(blur_sigma > 0.0) || !std::isfinite(blur_sigma)) {
    throw Error(ErrorKind::InvalidArgument, "blur_sigma must be > 0");
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * static_cast<size_t>(radius) + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_blur(const ImageBuffer& image, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = image.width(), h = image.height();
  std::vector<double> tmp(static_cast<size_t>(w) * h * 3), out(tmp.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          s += k[static_cast<size_t>(d + radius)] * image.at(reflect_index(x + d, w), y, c);
        }
        tmp[(static_cast<size_t>(y) * w + x) * 3 + c] = s;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          s += k[static_cast<size_t>(d + radius)] *
               tmp[(static_cast<size_t>(reflect_index(y + d, h)) * w + x) * 3 + c];
        }
        out[(static_cast<size_t>(y) * w + x) * 3 + c] = s;
      }
    }
  }
  return out;
}

uint8_t quantize_intensity(double v) {
  return static_cast<uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

ImageBuffer obfuscate(const ImageBuffer& image, std::span<const BoundingBox> boxes,
                      const ObfuscationConfig& cfg) {
  cfg.validate();
  ImageBuffer out = image;
  std::vector<PixelSpan> spans;
  for (const auto& b : boxes) {
    const PixelSpan s = covered_pixels(b, image.width(), image.height());
    if (!s.empty()) spans.push_back(s);
  }
  if (spans.empty()) return out;
  std::vector<double> blurred;
  if (cfg.mode == ObfuscationMode::Blur) blurred = gaussian_blur(image, cfg.blur_sigma);
  for (const auto& s : spans) {
    for (int y = s.y0; y < s.y1; ++y) {
      for (int x = s.x0; x < s.x1; ++x) {
        for (int c = 0; c < 3; ++c) {
          out.at(x, y, c) = cfg.mode == ObfuscationMode::Blackout
                                ? uint8_t{0}
                                : quantize_intensity(blurred[(static_cast<size_t>(y) * image.width() + x) * 3 + c]);
        }
      }
    }
  }
  return out;
}

}  // namespace salgate
