#include "salgate/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace salgate {

namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> read_png(const fs::path& path, uint32_t format, int& width, int& height) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingImage, path.string());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorKind::Io, "cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorKind::Io, "cannot decode PNG " + path.string() + ": " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buf;
}

void write_png(const fs::path& path, uint32_t format, int width, int height, const uint8_t* data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    throw Error(ErrorKind::Io, "cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace

ImageBuffer read_png_rgb(const fs::path& path) {
  int w = 0, h = 0;
  auto buf = read_png(path, PNG_FORMAT_RGB, w, h);
  return ImageBuffer(w, h, std::move(buf));
}

void write_png_rgb(const fs::path& path, const ImageBuffer& image) {
  write_atomically(path, [&](const fs::path& tmp) {
    write_png(tmp, PNG_FORMAT_RGB, image.width(), image.height(), image.data().data());
  });
}

void write_saliency_png(const fs::path& path, const SaliencyMap& map) {
  std::vector<uint8_t> gray(map.values().size());
  for (size_t i = 0; i < gray.size(); ++i) {
    gray[i] = static_cast<uint8_t>(std::lround(static_cast<double>(map.values()[i]) * 255.0));
  }
  write_atomically(path, [&](const fs::path& tmp) {
    write_png(tmp, PNG_FORMAT_GRAY, map.width(), map.height(), gray.data());
  });
}

SaliencyMap read_saliency_png(const fs::path& path) {
  int w = 0, h = 0;
  const auto buf = read_png(path, PNG_FORMAT_GRAY, w, h);
  std::vector<float> values(buf.size());
  for (size_t i = 0; i < buf.size(); ++i) values[i] = static_cast<float>(buf[i]) / 255.0f;
  return SaliencyMap(w, h, std::move(values));
}

SaliencyMap quantize_saliency(const SaliencyMap& map) {
  std::vector<float> values(map.values().size());
  for (size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<float>(std::lround(static_cast<double>(map.values()[i]) * 255.0)) / 255.0f;
  }
  return SaliencyMap(map.width(), map.height(), std::move(values));
}

void write_atomically(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  write_atomically(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed: " + tmp.string());
  });
}

}  // namespace salgate
