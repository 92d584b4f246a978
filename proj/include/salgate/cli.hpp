#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "salgate/config.hpp"
#include "salgate/core.hpp"

namespace salgate {

/// One line of a predictions file, boxes in source-image pixels:
/// {"image": id, "width": w, "height": h, "boxes": [[x0, y0, x1, y1, score], ...]}
struct PredictionRecord {
  std::string image;
  int width = 0, height = 0;
  std::vector<Detection> detections;
};

std::string prediction_line(const PredictionRecord& record);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);

/// File name of the saliency PNG written for an image id: '/' becomes '_', extension dropped.
std::string saliency_png_name(const std::string& image_id);

enum class TrainMode { Detector, Saliency, Hybrid };
TrainMode parse_train_mode(const std::string& s);
const char* to_string(TrainMode m);

struct TrainCommand {
  TrainMode mode = TrainMode::Detector;
  std::filesystem::path manifest;
  std::filesystem::path out_checkpoint;
  std::optional<std::filesystem::path> resume;  // trains train.epochs further epochs
  std::optional<std::filesystem::path> loss_log;  // CSV: epoch,loss
  bool verbose = false;
};

struct PredictCommand {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path out_predictions;
  // Saliency PNGs at source resolution. Hybrid checkpoints use their own map;
  // detector checkpoints need `saliency_checkpoint`.
  std::optional<std::filesystem::path> saliency_dir;
  std::optional<std::filesystem::path> saliency_checkpoint;
  int jobs = 1;
};

struct GateCommand {
  std::filesystem::path predictions;
  std::filesystem::path saliency_dir;
  std::filesystem::path out_predictions;
  std::optional<std::filesystem::path> decision_log;  // JSON lines, one per detection
};

/// Returns the manifest path.
std::filesystem::path cmd_gen(const RunConfig& cfg, int n, const std::filesystem::path& out_dir);
/// Writes <out_dir>/train.jsonl and test.jsonl next to the source manifest's files.
std::pair<std::filesystem::path, std::filesystem::path> cmd_split(const RunConfig& cfg,
                                                                  const std::filesystem::path& manifest);
void cmd_train(const RunConfig& cfg, const TrainCommand& cmd);
void cmd_predict(const RunConfig& cfg, const PredictCommand& cmd);
void cmd_gate(const RunConfig& cfg, const GateCommand& cmd);
EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& predictions,
                    const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& out_report);
void cmd_obfuscate(const RunConfig& cfg, const std::filesystem::path& predictions,
                   const std::filesystem::path& manifest, const std::filesystem::path& out_dir, int jobs = 1);

struct ReplayRow {
  std::string method;
  std::optional<double> map;  // empty when the row's detector was not supplied
};

struct ReplayCommand {
  std::filesystem::path out_dir;
  int scenes = 500;
  // Predictions of an external detector on the test manifest (the two-stage row pair).
  std::optional<std::filesystem::path> external_predictions;
  int jobs = 1;
  bool verbose = false;
};

/// gen -> split -> train x3 -> predict -> gate -> eval; six rows in table order.
std::vector<ReplayRow> cmd_replay(const RunConfig& cfg, const ReplayCommand& cmd);
std::string format_replay_table(const std::vector<ReplayRow>& rows);

/// Parses argv and dispatches; returns the process exit code (0 ok, 1 runtime error, 2 usage).
int run_cli(int argc, char** argv);

}  // namespace salgate
