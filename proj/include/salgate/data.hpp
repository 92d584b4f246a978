#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "salgate/core.hpp"
#include "salgate/nn.hpp"
#include "salgate/train.hpp"

namespace salgate {

/// One manifest line. Paths are relative to the manifest directory.
struct AnnotationRecord {
  std::string image;
  int width = 0, height = 0;
  std::vector<BoundingBox> boxes;
  std::optional<std::string> saliency_mask;
};

inline constexpr int kManifestVersion = 1;

/// JSON-lines manifest with an optional leading header line
/// {"format":"salgate-manifest","version":1}. Image and mask paths must exist.
std::vector<AnnotationRecord> load_dataset(const std::filesystem::path& manifest);

std::string manifest_header_line();
std::string manifest_line(const AnnotationRecord& record);
void write_manifest(const std::filesystem::path& manifest, const std::vector<AnnotationRecord>& records);

/// Deterministic shuffle by seed, then the first round(train_fraction * N)
/// items (restored to input order) become the training partition.
template <class Item>
std::pair<std::vector<Item>, std::vector<Item>> split(const std::vector<Item>& items,
                                                      double train_fraction, uint64_t seed) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "cannot split an empty dataset");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in [0,1]");
  }
  std::vector<int> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  nn::deterministic_shuffle(std::span<int>(order), rng);
  const auto n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(items.size())));
  std::vector<int> train_idx(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<int> test_idx(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::pair<std::vector<Item>, std::vector<Item>> out;
  for (int i : train_idx) out.first.push_back(items[i]);
  for (int i : test_idx) out.second.push_back(items[i]);
  return out;
}

/// Maps between an original image frame and the square network input.
struct LetterboxTransform {
  int source_width = 0, source_height = 0;
  int size = 0;
  int content_width = 0, content_height = 0;
  int pad_x = 0, pad_y = 0;

  double scale_x() const { return static_cast<double>(content_width) / source_width; }
  double scale_y() const { return static_cast<double>(content_height) / source_height; }
  BoundingBox to_input(const BoundingBox& b) const;
  /// Back to source pixels, clipped to the source frame.
  std::optional<BoundingBox> to_source(const BoundingBox& b) const;
  bool is_identity() const {
    return source_width == size && source_height == size;
  }
};

inline constexpr uint8_t kLetterboxGray = 128;

/// Aspect-preserving bilinear resize into a size x size canvas padded with gray.
std::pair<ImageBuffer, LetterboxTransform> letterbox(const ImageBuffer& image, int size);
/// Same geometry for a single-channel map; padding is zero.
SaliencyMap letterbox_map(const SaliencyMap& map, const LetterboxTransform& t);
/// Crops the content area of an input-frame map and resamples it to the source frame.
SaliencyMap unletterbox_map(const SaliencyMap& map, const LetterboxTransform& t);

struct LoadedSample {
  LabeledSample sample;  // at network input size
  LetterboxTransform transform;
  AnnotationRecord record;
};

/// Reads images (and masks when present) of a manifest and letterboxes them.
std::vector<LoadedSample> load_samples(const std::filesystem::path& manifest, int input_size);

struct SyntheticSceneConfig {
  int canvas = 128;
  int min_salient = 1, max_salient = 2;
  int min_privacy = 1, max_privacy = 3;
  // Chance that a salient object carries a text-like patch that is not a privacy region.
  double distractor_probability = 0.5;
  uint64_t seed = 0;
  double max_overlap_iou = 0.1;
  int max_attempts = 500;

  void validate() const;
};

struct SyntheticScene {
  ImageBuffer image;
  std::vector<BoundingBox> privacy_boxes;
  std::vector<BoundingBox> salient_boxes;
  std::vector<BoundingBox> distractor_boxes;
  SaliencyMap mask;  // binary: 1 on salient objects
};

/// Scene i depends only on (seed, i), so any prefix of a larger run is identical.
SyntheticScene generate_scene(const SyntheticSceneConfig& cfg, int index);
std::vector<SyntheticScene> generate_synthetic(const SyntheticSceneConfig& cfg, int n_scenes);

LabeledSample to_sample(const SyntheticScene& scene, std::string id);

/// Writes images/, masks/ and manifest.jsonl under `out_dir`; returns the manifest path.
std::filesystem::path write_synthetic_dataset(const std::vector<SyntheticScene>& scenes,
                                              const std::filesystem::path& out_dir);

}  // namespace salgate
