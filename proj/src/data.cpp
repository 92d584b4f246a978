#include "salgate/data.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "salgate/image_io.hpp"

namespace salgate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error parse_error(size_t line, const std::string& what) {
  return Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what);
}

AnnotationRecord parse_record(const json& j, size_t line) {
  AnnotationRecord r;
  try {
    r.image = j.at("image").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    if (j.contains("saliency_mask") && !j.at("saliency_mask").is_null()) {
      r.saliency_mask = j.at("saliency_mask").get<std::string>();
    }
    for (const auto& b : j.at("boxes")) {
      if (!b.is_array() || b.size() != 4) throw parse_error(line, "box must be [x_min,y_min,x_max,y_max]");
      try {
        r.boxes.emplace_back(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>());
      } catch (const Error& e) {
        throw Error(ErrorKind::InvalidBox, "line " + std::to_string(line) + " (" + r.image + "): " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw parse_error(line, e.what());
  }
  if (r.width <= 0 || r.height <= 0) throw parse_error(line, "width/height must be positive");
  for (const auto& b : r.boxes) {
    if (!clip_box(b, r.width, r.height)) {
      throw Error(ErrorKind::InvalidBox,
                  "line " + std::to_string(line) + " (" + r.image + "): box lies outside the image");
    }
  }
  return r;
}

}  // namespace

std::vector<AnnotationRecord> load_dataset(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + manifest.string());
  const fs::path root = manifest.parent_path();
  std::vector<AnnotationRecord> records;
  std::string text;
  size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw parse_error(line, e.what());
    }
    if (!j.is_object()) throw parse_error(line, "record must be a JSON object");
    if (j.contains("format")) {
      if (j.at("format") != "salgate-manifest" || j.value("version", 0) != kManifestVersion) {
        throw parse_error(line, "unsupported manifest header");
      }
      continue;
    }
    AnnotationRecord r = parse_record(j, line);
    if (!fs::exists(root / r.image)) throw Error(ErrorKind::MissingImage, (root / r.image).string());
    if (r.saliency_mask && !fs::exists(root / *r.saliency_mask)) {
      throw Error(ErrorKind::MissingImage, (root / *r.saliency_mask).string());
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string manifest_header_line() {
  return json{{"format", "salgate-manifest"}, {"version", kManifestVersion}}.dump();
}

std::string manifest_line(const AnnotationRecord& r) {
  json boxes = json::array();
  for (const auto& b : r.boxes) boxes.push_back({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
  json j{{"image", r.image}, {"width", r.width}, {"height", r.height}, {"boxes", boxes}};
  if (r.saliency_mask) j["saliency_mask"] = *r.saliency_mask;
  return j.dump();
}

void write_manifest(const fs::path& manifest, const std::vector<AnnotationRecord>& records) {
  std::ostringstream os;
  os << manifest_header_line() << '\n';
  for (const auto& r : records) os << manifest_line(r) << '\n';
  write_text_atomically(manifest, os.str());
}

BoundingBox LetterboxTransform::to_input(const BoundingBox& b) const {
  return BoundingBox(b.x_min() * scale_x() + pad_x, b.y_min() * scale_y() + pad_y,
                     b.x_max() * scale_x() + pad_x, b.y_max() * scale_y() + pad_y);
}

std::optional<BoundingBox> LetterboxTransform::to_source(const BoundingBox& b) const {
  const double x0 = (b.x_min() - pad_x) / scale_x(), x1 = (b.x_max() - pad_x) / scale_x();
  const double y0 = (b.y_min() - pad_y) / scale_y(), y1 = (b.y_max() - pad_y) / scale_y();
  return clip_box(BoundingBox(x0, y0, x1, y1), source_width, source_height);
}

namespace {

LetterboxTransform make_transform(int w, int h, int size) {
  LetterboxTransform t;
  t.source_width = w;
  t.source_height = h;
  t.size = size;
  const double scale = static_cast<double>(size) / std::max(w, h);
  t.content_width = std::clamp(static_cast<int>(std::lround(w * scale)), 1, size);
  t.content_height = std::clamp(static_cast<int>(std::lround(h * scale)), 1, size);
  t.pad_x = (size - t.content_width) / 2;
  t.pad_y = (size - t.content_height) / 2;
  return t;
}

uint8_t to_byte(double v) { return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::pair<ImageBuffer, LetterboxTransform> letterbox(const ImageBuffer& image, int size) {
  if (size <= 0) throw Error(ErrorKind::InvalidArgument, "letterbox size must be positive");
  const LetterboxTransform t = make_transform(image.width(), image.height(), size);
  nn::Tensor<double> src(3, image.height(), image.width());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) src.at(c, y, x) = image.at(x, y, c);
  const auto dst = nn::resize_bilinear(src, t.content_height, t.content_width);
  ImageBuffer out(size, size, kLetterboxGray);
  for (int y = 0; y < t.content_height; ++y)
    for (int x = 0; x < t.content_width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x + t.pad_x, y + t.pad_y, c) = to_byte(dst.at(c, y, x));
  return {std::move(out), t};
}

SaliencyMap letterbox_map(const SaliencyMap& map, const LetterboxTransform& t) {
  nn::Tensor<double> src(1, map.height(), map.width());
  std::copy(map.values().begin(), map.values().end(), src.data.begin());
  const auto dst = nn::resize_bilinear(src, t.content_height, t.content_width);
  std::vector<float> values(static_cast<size_t>(t.size) * t.size, 0.0f);
  for (int y = 0; y < t.content_height; ++y)
    for (int x = 0; x < t.content_width; ++x)
      values[static_cast<size_t>(y + t.pad_y) * t.size + x + t.pad_x] =
          std::clamp(static_cast<float>(dst.at(0, y, x)), 0.0f, 1.0f);
  return SaliencyMap(t.size, t.size, std::move(values));
}

SaliencyMap unletterbox_map(const SaliencyMap& map, const LetterboxTransform& t) {
  if (map.width() != t.size || map.height() != t.size) {
    throw Error(ErrorKind::DimensionMismatch, "map is not in the letterboxed input frame");
  }
  nn::Tensor<double> crop(1, t.content_height, t.content_width);
  for (int y = 0; y < t.content_height; ++y)
    for (int x = 0; x < t.content_width; ++x) crop.at(0, y, x) = map.at(x + t.pad_x, y + t.pad_y);
  const auto dst = nn::resize_bilinear(crop, t.source_height, t.source_width);
  std::vector<float> values(dst.size());
  for (size_t i = 0; i < dst.size(); ++i) values[i] = std::clamp(static_cast<float>(dst.data[i]), 0.0f, 1.0f);
  return SaliencyMap(t.source_width, t.source_height, std::move(values));
}

std::vector<LoadedSample> load_samples(const fs::path& manifest, int input_size) {
  const fs::path root = manifest.parent_path();
  std::vector<LoadedSample> out;
  for (auto& record : load_dataset(manifest)) {
    const ImageBuffer raw = read_png_rgb(root / record.image);
    if (raw.width() != record.width || raw.height() != record.height) {
      throw Error(ErrorKind::DimensionMismatch, record.image + ": PNG size differs from manifest");
    }
    auto [image, t] = letterbox(raw, input_size);
    std::vector<BoundingBox> boxes;
    for (const auto& b : record.boxes) {
      if (auto c = clip_box(b, record.width, record.height)) boxes.push_back(t.to_input(*c));
    }
    std::optional<SaliencyMap> mask;
    if (record.saliency_mask) {
      const SaliencyMap m = read_saliency_png(root / *record.saliency_mask);
      if (m.width() != record.width || m.height() != record.height) {
        throw Error(ErrorKind::DimensionMismatch, *record.saliency_mask + ": mask size differs from image");
      }
      mask = t.is_identity() ? m : letterbox_map(m, t);
    }
    LabeledSample sample{record.image, std::move(image), std::move(boxes), std::move(mask)};
    out.push_back({std::move(sample), t, std::move(record)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

void SyntheticSceneConfig::validate() const {
  if (canvas < 64) throw Error(ErrorKind::InvalidArgument, "canvas must be >= 64");
  if (min_salient < 0 || max_salient < min_salient || min_privacy < 0 || max_privacy < min_privacy) {
    throw Error(ErrorKind::InvalidArgument, "object count ranges must satisfy 0 <= min <= max");
  }
  if (!(distractor_probability >= 0.0 && distractor_probability <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "distractor_probability must lie in [0,1]");
  }
  if (!(max_overlap_iou >= 0.0 && max_overlap_iou <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "max_overlap_iou must lie in [0,1]");
  }
  if (max_attempts <= 0) throw Error(ErrorKind::InvalidArgument, "max_attempts must be > 0");
}

namespace {

/// Portable draws on top of the engine, so scenes are identical across standard libraries.
class SceneRng {
 public:
  SceneRng(uint64_t seed, int index) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(index), 0x5a17u};
    engine_.seed(seq);
  }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<uint64_t>(hi - lo + 1));
  }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

struct Rgb {
  int r, g, b;
};

Rgb random_color(SceneRng& rng) {
  return {rng.uniform_int(30, 225), rng.uniform_int(30, 225), rng.uniform_int(30, 225)};
}

int color_distance(const Rgb& a, const Rgb& b) {
  return std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b);
}

struct Rect {
  int x, y, w, h;
  BoundingBox box() const { return BoundingBox(x, y, x + w, y + h); }
};

class Canvas {
 public:
  explicit Canvas(int size) : size_(size), rgb_(static_cast<size_t>(size) * size * 3), mask_(static_cast<size_t>(size) * size, 0.0f) {}

  void fill(const Rgb& c) {
    for (int y = 0; y < size_; ++y)
      for (int x = 0; x < size_; ++x) set(x, y, c);
  }
  void set(int x, int y, const Rgb& c) {
    int* p = &rgb_[(static_cast<size_t>(y) * size_ + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  Rgb get(int x, int y) const {
    const int* p = &rgb_[(static_cast<size_t>(y) * size_ + x) * 3];
    return {p[0], p[1], p[2]};
  }
  float& mask(int x, int y) { return mask_[static_cast<size_t>(y) * size_ + x]; }
  int size() const { return size_; }

  ImageBuffer to_image(SceneRng& rng, int noise) const {
    std::vector<uint8_t> out(rgb_.size());
    for (size_t i = 0; i < rgb_.size(); ++i) {
      const int v = rgb_[i] + (noise > 0 ? rng.uniform_int(-noise, noise) : 0);
      out[i] = static_cast<uint8_t>(std::clamp(v, 0, 255));
    }
    return ImageBuffer(size_, size_, std::move(out));
  }
  SaliencyMap to_mask() const { return SaliencyMap(size_, size_, mask_); }

 private:
  int size_;
  std::vector<int> rgb_;
  std::vector<float> mask_;
};

bool inside_rounded_rect(const Rect& r, int radius, int x, int y) {
  if (x < r.x || x >= r.x + r.w || y < r.y || y >= r.y + r.h) return false;
  const double px = x + 0.5, py = y + 0.5;
  const double cx = std::clamp(px, static_cast<double>(r.x + radius), static_cast<double>(r.x + r.w - radius));
  const double cy = std::clamp(py, static_cast<double>(r.y + radius), static_cast<double>(r.y + r.h - radius));
  const double dx = px - cx, dy = py - cy;
  return dx * dx + dy * dy <= static_cast<double>(radius) * radius;
}

void draw_salient(Canvas& canvas, const Rect& r, int radius, int outline, const Rgb& fill) {
  const Rgb dark{fill.r / 4, fill.g / 4, fill.b / 4};
  const Rect inner{r.x + outline, r.y + outline, r.w - 2 * outline, r.h - 2 * outline};
  const int inner_radius = std::max(0, radius - outline);
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      if (!inside_rounded_rect(r, radius, x, y)) continue;
      canvas.set(x, y, inside_rounded_rect(inner, inner_radius, x, y) ? fill : dark);
      canvas.mask(x, y) = 1.0f;
    }
  }
}

int clamp_channel(int v) { return std::clamp(v, 0, 255); }

/// Low-contrast block with rows of short dark "words", drawn relative to the
/// color underneath so it looks the same on any uniform surface.
void draw_text_patch(Canvas& canvas, const Rect& r, SceneRng& rng, int scale_px) {
  const Rgb base = canvas.get(r.x + r.w / 2, r.y + r.h / 2);
  const int lum = (base.r + base.g + base.b) / 3;
  const int shift = (lum > 128 ? -1 : 1) * rng.uniform_int(18, 30);
  const Rgb paper{clamp_channel(base.r + shift), clamp_channel(base.g + shift), clamp_channel(base.b + shift)};
  const int ink_shift = (lum > 128 ? -1 : 1) * rng.uniform_int(55, 75);
  const Rgb ink{clamp_channel(base.r + ink_shift), clamp_channel(base.g + ink_shift), clamp_channel(base.b + ink_shift)};
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) canvas.set(x, y, paper);
  const int line_h = std::max(1, scale_px);
  const int pitch = 2 * line_h + std::max(1, scale_px / 2);
  for (int ly = r.y + line_h; ly + line_h <= r.y + r.h - line_h / 2; ly += pitch) {
    int x = r.x + std::max(1, scale_px);
    const int x_end = r.x + r.w - std::max(1, scale_px);
    while (x < x_end) {
      const int word = rng.uniform_int(2 * scale_px, 5 * scale_px);
      for (int xx = x; xx < std::min(x + word, x_end); ++xx)
        for (int yy = ly; yy < ly + line_h; ++yy) canvas.set(xx, yy, ink);
      x += word + rng.uniform_int(scale_px, 2 * scale_px);
    }
  }
}

bool overlaps_mask(Canvas& canvas, const Rect& r, int margin) {
  const int n = canvas.size();
  for (int y = std::max(0, r.y - margin); y < std::min(n, r.y + r.h + margin); ++y)
    for (int x = std::max(0, r.x - margin); x < std::min(n, r.x + r.w + margin); ++x)
      if (canvas.mask(x, y) > 0.0f) return true;
  return false;
}

bool iou_ok(const Rect& r, const std::vector<Rect>& placed, double max_iou) {
  return std::all_of(placed.begin(), placed.end(),
                     [&](const Rect& p) { return iou(r.box(), p.box()) <= max_iou; });
}

}  // namespace

SyntheticScene generate_scene(const SyntheticSceneConfig& cfg, int index) {
  cfg.validate();
  SceneRng rng(cfg.seed, index);
  const int S = cfg.canvas;
  const double unit = S / 128.0;
  const int px = std::max(1, static_cast<int>(std::lround(unit)));
  auto scaled = [&](double v) { return std::max(1, static_cast<int>(std::lround(v * unit))); };

  Canvas canvas(S);
  const Rgb background = random_color(rng);
  canvas.fill(background);

  auto fail = [&](const std::string& what) {
    return Error(ErrorKind::PlacementFailure,
                 "scene " + std::to_string(index) + ": could not place " + what + " within " +
                     std::to_string(cfg.max_attempts) + " attempts");
  };

  SyntheticScene scene{ImageBuffer(S, S), {}, {}, {}, SaliencyMap(S, S, 0.0f)};
  std::vector<Rect> salient;
  const int n_salient = rng.uniform_int(cfg.min_salient, cfg.max_salient);
  const int outline = std::max(2, scaled(2.5));
  for (int i = 0; i < n_salient; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const int w = rng.uniform_int(scaled(40), scaled(64));
      const int h = rng.uniform_int(scaled(40), scaled(64));
      const Rect r{rng.uniform_int(0, S - w), rng.uniform_int(0, S - h), w, h};
      if (!iou_ok(r, salient, cfg.max_overlap_iou)) continue;
      Rgb fill = random_color(rng);
      for (int tries = 0; color_distance(fill, background) < 180 && tries < 64; ++tries) fill = random_color(rng);
      const int radius = rng.uniform_int(0, static_cast<int>(0.12 * std::min(w, h)));
      draw_salient(canvas, r, radius, outline, fill);
      salient.push_back(r);
      scene.salient_boxes.push_back(r.box());
      placed = true;
    }
    if (!placed) throw fail("salient object " + std::to_string(i));
  }

  auto patch_size = [&]() {
    return std::pair{rng.uniform_int(scaled(14), scaled(26)), rng.uniform_int(scaled(10), scaled(18))};
  };

  const int margin = scaled(10);
  for (const Rect& s : salient) {
    if (!rng.bernoulli(cfg.distractor_probability)) continue;
    const auto [w, h] = patch_size();
    const int x_lo = s.x + margin, x_hi = s.x + s.w - margin - w;
    const int y_lo = s.y + margin, y_hi = s.y + s.h - margin - h;
    if (x_hi < x_lo || y_hi < y_lo) continue;
    const Rect r{rng.uniform_int(x_lo, x_hi), rng.uniform_int(y_lo, y_hi), w, h};
    draw_text_patch(canvas, r, rng, px);
    scene.distractor_boxes.push_back(r.box());
  }

  std::vector<Rect> privacy;
  const int n_privacy = rng.uniform_int(cfg.min_privacy, cfg.max_privacy);
  for (int i = 0; i < n_privacy; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const auto [w, h] = patch_size();
      const Rect r{rng.uniform_int(1, S - w - 1), rng.uniform_int(1, S - h - 1), w, h};
      if (overlaps_mask(canvas, r, scaled(2)) || !iou_ok(r, privacy, cfg.max_overlap_iou)) continue;
      draw_text_patch(canvas, r, rng, px);
      privacy.push_back(r);
      scene.privacy_boxes.push_back(r.box());
      placed = true;
    }
    if (!placed) throw fail("privacy region " + std::to_string(i));
  }

  scene.image = canvas.to_image(rng, 3);
  scene.mask = canvas.to_mask();
  return scene;
}

std::vector<SyntheticScene> generate_synthetic(const SyntheticSceneConfig& cfg, int n_scenes) {
  if (n_scenes < 1) throw Error(ErrorKind::InvalidArgument, "n_scenes must be >= 1");
  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) scenes.push_back(generate_scene(cfg, i));
  return scenes;
}

LabeledSample to_sample(const SyntheticScene& scene, std::string id) {
  return LabeledSample{std::move(id), scene.image, scene.privacy_boxes, scene.mask};
}

fs::path write_synthetic_dataset(const std::vector<SyntheticScene>& scenes, const fs::path& out_dir) {
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  std::vector<AnnotationRecord> records;
  for (size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu.png", i);
    const std::string image = std::string("images/") + name;
    const std::string mask = std::string("masks/") + name;
    write_png_rgb(out_dir / image, scenes[i].image);
    write_saliency_png(out_dir / mask, scenes[i].mask);
    records.push_back({image, scenes[i].image.width(), scenes[i].image.height(), scenes[i].privacy_boxes, mask});
  }
  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace salgate
