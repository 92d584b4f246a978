#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "salgate/core.hpp"

namespace salgate {

ImageBuffer read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const ImageBuffer& image);

/// 8-bit gray PNG, value = round(saliency * 255).
void write_saliency_png(const std::filesystem::path& path, const SaliencyMap& map);
/// Gray (or color, luminance) PNG read back as value / 255.
SaliencyMap read_saliency_png(const std::filesystem::path& path);

/// Saliency quantized to the 8-bit PNG grid: round(v*255)/255.
SaliencyMap quantize_saliency(const SaliencyMap& map);

/// Writes through `writer` into a sibling temp file, then renames over `path`.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(const std::filesystem::path&)>& writer);
void write_text_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace salgate
