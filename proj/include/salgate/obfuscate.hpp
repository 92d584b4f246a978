#pragma once

#include <span>
#include <vector>

#include "salgate/core.hpp"

namespace salgate {

enum class ObfuscationMode { Blur, Blackout };

struct ObfuscationConfig {
  ObfuscationMode mode = ObfuscationMode::Blur;
  double blur_sigma = 8.0;

  int kernel_radius() const;  // ceil(3 * sigma)
  void validate() const;
};

/// Sampled Gaussian of radius ceil(3*sigma), normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma);

/// Reflect-101 index into [0, n) for any integer offset (d c b | a b c d | c b a).
int reflect_index(int i, int n);

/// Separable Gaussian of the whole image with reflect padding, before quantization.
/// Layout matches ImageBuffer (interleaved RGB).
std::vector<double> gaussian_blur(const ImageBuffer& image, double sigma);

uint8_t quantize_intensity(double v);

/// Pixels with centers inside any box are blacked out or replaced by the blurred
/// image; every other pixel is left untouched.
ImageBuffer obfuscate(const ImageBuffer& image, std::span<const BoundingBox> boxes,
                      const ObfuscationConfig& cfg = {});

}  // namespace salgate
