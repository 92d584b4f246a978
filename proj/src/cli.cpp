#include "salgate/cli.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "salgate/checkpoint.hpp"
#include "salgate/image_io.hpp"

namespace salgate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
template <class F>
void parallel_for(size_t n, int jobs, F&& fn) {
  const size_t workers = std::min(n, static_cast<size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Saliency init uses a derived seed so detector and saliency weights differ.
uint64_t saliency_seed(uint64_t seed) { return seed ^ 0x5a11e9c7ULL; }

const char* kind_name(TrainMode m) { return to_string(m); }

}  // namespace

std::string prediction_line(const PredictionRecord& r) {
  json boxes = json::array();
  for (const auto& d : r.detections) {
    boxes.push_back({d.box.x_min(), d.box.y_min(), d.box.x_max(), d.box.y_max(), d.score});
  }
  return json{{"image", r.image}, {"width", r.width}, {"height", r.height}, {"boxes", boxes}}.dump();
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PredictionRecord r;
      r.image = j.at("image").get<std::string>();
      r.width = j.value("width", 0);
      r.height = j.value("height", 0);
      for (const auto& b : j.at("boxes")) {
        if (b.size() != 5) throw Error(ErrorKind::ParseError, "box needs [x0,y0,x1,y1,score]");
        r.detections.emplace_back(BoundingBox(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                              b[3].get<double>()),
                                  b[4].get<double>());
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(const fs::path& path, const std::vector<PredictionRecord>& records) {
  std::string text;
  for (const auto& r : records) text += prediction_line(r) + "\n";
  write_text_atomically(path, text);
}

std::string saliency_png_name(const std::string& image_id) {
  fs::path p(image_id);
  std::string stem = (p.parent_path() / p.stem()).generic_string();
  for (char& c : stem) {
    if (c == '/') c = '_';
  }
  return stem + ".png";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "detector") return TrainMode::Detector;
  if (s == "saliency") return TrainMode::Saliency;
  if (s == "hybrid") return TrainMode::Hybrid;
  throw Error(ErrorKind::InvalidArgument, "mode must be detector, saliency or hybrid");
}

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Detector: return "detector";
    case TrainMode::Saliency: return "saliency";
    case TrainMode::Hybrid: return "hybrid";
  }
  return "?";
}

fs::path cmd_gen(const RunConfig& cfg, int n, const fs::path& out_dir) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  return write_synthetic_dataset(generate_synthetic(cfg.synthetic, n), out_dir);
}

std::pair<fs::path, fs::path> cmd_split(const RunConfig& cfg, const fs::path& manifest) {
  const auto records = load_dataset(manifest);
  auto [train, test] = split(records, cfg.split.train_fraction, cfg.split.split_seed);
  const fs::path dir = manifest.parent_path();
  const fs::path train_path = dir / "train.jsonl", test_path = dir / "test.jsonl";
  write_manifest(train_path, train);
  write_manifest(test_path, test);
  return {train_path, test_path};
}

namespace {

struct Model {
  TrainMode mode = TrainMode::Detector;
  std::unique_ptr<DetectorNet<float>> det;
  std::unique_ptr<SaliencyNet<float>> sal;
  std::unique_ptr<HybridNet<float>> hyb;

  std::vector<nn::Param<float>*> params() {
    if (det) return det->params();
    if (sal) return sal->params();
    return hyb->params();
  }
};

Model build_model(TrainMode mode, const DetectorConfig& dc, const SaliencyNetConfig& sc, const FusionConfig& fc) {
  Model m;
  m.mode = mode;
  switch (mode) {
    case TrainMode::Detector: m.det = std::make_unique<DetectorNet<float>>(dc); break;
    case TrainMode::Saliency: m.sal = std::make_unique<SaliencyNet<float>>(sc); break;
    case TrainMode::Hybrid: m.hyb = std::make_unique<HybridNet<float>>(dc, sc, fc); break;
  }
  return m;
}

/// Architecture comes from the checkpoint; thresholds come from the run config.
Model load_model(const Checkpoint& ckpt, const RunConfig& cfg) {
  const TrainMode mode = parse_train_mode(ckpt.kind);
  DetectorConfig dc = detector_config_from_json(ckpt.config.at("detector"));
  dc.conf_threshold = cfg.detector.conf_threshold;
  dc.nms_iou_threshold = cfg.detector.nms_iou_threshold;
  dc.max_detections = cfg.detector.max_detections;
  const SaliencyNetConfig sc = saliency_config_from_json(ckpt.config.at("saliency"));
  const FusionConfig fc = fusion_config_from_json(ckpt.config.at("fusion"));
  Model m = build_model(mode, dc, sc, fc);
  load_parameters(ckpt, m.params());
  return m;
}

}  // namespace

void cmd_train(const RunConfig& cfg, const TrainCommand& cmd) {
  const auto loaded = load_samples(cmd.manifest, cfg.detector.input_size);
  std::vector<LabeledSample> data;
  data.reserve(loaded.size());
  for (const auto& l : loaded) data.push_back(l.sample);

  RunConfig echo = cfg;
  TrainState state;
  Model model;
  if (cmd.resume) {
    const Checkpoint ckpt = load_checkpoint(*cmd.resume);
    if (parse_train_mode(ckpt.kind) != cmd.mode) {
      throw Error(ErrorKind::ConfigMismatch, "resume checkpoint is a " + ckpt.kind + " model");
    }
    model = load_model(ckpt, cfg);
    state = restore_train_state(ckpt, model.params());
    echo.detector = detector_config_from_json(ckpt.config.at("detector"));
    echo.saliency = saliency_config_from_json(ckpt.config.at("saliency"));
    echo.fusion = fusion_config_from_json(ckpt.config.at("fusion"));
  } else {
    model = build_model(cmd.mode, cfg.detector, cfg.saliency, cfg.fusion);
    switch (cmd.mode) {
      case TrainMode::Detector: model.det->init(cfg.train.seed); break;
      case TrainMode::Saliency: model.sal->init(saliency_seed(cfg.train.seed)); break;
      case TrainMode::Hybrid: model.hyb->init(cfg.train.seed, saliency_seed(cfg.train.seed)); break;
    }
  }

  EpochCallback log;
  if (cmd.verbose) {
    log = [&](int epoch, double loss) {
      std::fprintf(stderr, "[%s] epoch %d loss %.6f\n", kind_name(cmd.mode), epoch, loss);
    };
  }
  switch (cmd.mode) {
    case TrainMode::Detector: state = train_detector(*model.det, data, cfg.train, state, log); break;
    case TrainMode::Saliency: state = train_saliency(*model.sal, data, cfg.train, state, log); break;
    case TrainMode::Hybrid: state = train_hybrid(*model.hyb, data, cfg.train, state, log); break;
  }
  state.seed = cfg.train.seed;
  save_checkpoint(cmd.out_checkpoint, make_checkpoint(to_string(cmd.mode), to_json(echo), model.params(), state));
  if (cmd.loss_log) {
    std::ostringstream csv;
    csv << "epoch,loss\n";
    csv.precision(9);
    for (size_t i = 0; i < state.epoch_losses.size(); ++i) csv << i + 1 << ',' << state.epoch_losses[i] << '\n';
    write_text_atomically(*cmd.loss_log, csv.str());
  }
}

void cmd_predict(const RunConfig& cfg, const PredictCommand& cmd) {
  Model model = load_model(load_checkpoint(cmd.checkpoint), cfg);
  if (model.mode == TrainMode::Saliency) {
    throw Error(ErrorKind::ConfigMismatch, "predict needs a detector or hybrid checkpoint");
  }
  std::unique_ptr<SaliencyNet<float>> sal;
  if (cmd.saliency_checkpoint) {
    Model s = load_model(load_checkpoint(*cmd.saliency_checkpoint), cfg);
    if (s.mode != TrainMode::Saliency) throw Error(ErrorKind::ConfigMismatch, "saliency checkpoint expected");
    sal = std::move(s.sal);
  }
  if (cmd.saliency_dir && model.mode == TrainMode::Detector && !sal) {
    throw Error(ErrorKind::InvalidArgument, "--with-saliency on a detector checkpoint needs --saliency-checkpoint");
  }
  const int input_size =
      model.det ? model.det->config().input_size : model.hyb->detector().config().input_size;
  if (sal && sal->config().input_size != input_size) {
    throw Error(ErrorKind::ConfigMismatch, "saliency checkpoint input size differs from the detector");
  }

  const auto records = load_dataset(cmd.manifest);
  const fs::path root = cmd.manifest.parent_path();
  std::vector<PredictionRecord> out(records.size());
  parallel_for(records.size(), cmd.jobs, [&](size_t i) {
    const auto& rec = records[i];
    const ImageBuffer raw = read_png_rgb(root / rec.image);
    auto [image, t] = letterbox(raw, input_size);
    std::vector<Detection> dets;
    std::optional<SaliencyMap> map;
    if (model.hyb) {
      HybridOutput h = hybrid_forward(*model.hyb, image);
      dets = std::move(h.detections);
      if (!sal) map = std::move(h.saliency);
    } else {
      dets = predict(*model.det, image);
    }
    if (sal && cmd.saliency_dir) map = saliency_forward(*sal, image);
    PredictionRecord& r = out[i];
    r.image = rec.image;
    r.width = raw.width();
    r.height = raw.height();
    for (const auto& d : dets) {
      if (auto b = t.to_source(d.box)) r.detections.emplace_back(*b, d.score);
    }
    if (cmd.saliency_dir && map) {
      const SaliencyMap source = t.is_identity() ? *map : unletterbox_map(*map, t);
      write_saliency_png(*cmd.saliency_dir / saliency_png_name(rec.image), source);
    }
  });
  write_predictions(cmd.out_predictions, out);
}

void cmd_gate(const RunConfig& cfg, const GateCommand& cmd) {
  cfg.gate.validate();
  auto records = read_predictions(cmd.predictions);
  std::string log;
  for (auto& r : records) {
    const fs::path map_path = cmd.saliency_dir / saliency_png_name(r.image);
    if (!fs::exists(map_path)) throw Error(ErrorKind::MissingImage, "no saliency map " + map_path.string());
    const SaliencyMap map = read_saliency_png(map_path);
    const int w = r.width > 0 ? r.width : map.width();
    const int h = r.height > 0 ? r.height : map.height();
    const auto decisions = gate(r.detections, map, w, h, cfg.gate);
    for (const auto& d : decisions) {
      const auto& b = d.detection.box;
      log += json{{"image", r.image},
                  {"box", {b.x_min(), b.y_min(), b.x_max(), b.y_max()}},
                  {"score", d.detection.score},
                  {"mean_saliency", d.mean_saliency},
                  {"kept", d.kept},
                  {"empty_region", d.empty_region}}
                 .dump() +
             "\n";
    }
    r.detections = kept_detections(decisions);
  }
  write_predictions(cmd.out_predictions, records);
  if (cmd.decision_log) write_text_atomically(*cmd.decision_log, log);
}

EvalReport cmd_eval(const RunConfig& cfg, const fs::path& predictions, const fs::path& manifest,
                    const std::optional<fs::path>& out_report) {
  const auto records = load_dataset(manifest);
  std::vector<ImageTruth> truths;
  for (const auto& r : records) truths.push_back({r.image, r.boxes});
  std::vector<ImagePredictions> preds;
  for (auto& p : read_predictions(predictions)) preds.push_back({p.image, std::move(p.detections)});
  EvalReport report = evaluate(preds, truths, cfg.eval);
  if (out_report) write_text_atomically(*out_report, report_to_json(report).dump(2) + "\n");
  return report;
}

void cmd_obfuscate(const RunConfig& cfg, const fs::path& predictions, const fs::path& manifest,
                   const fs::path& out_dir, int jobs) {
  cfg.obfuscation.validate();
  const auto records = load_dataset(manifest);
  std::map<std::string, size_t> by_id;
  for (size_t i = 0; i < records.size(); ++i) by_id.emplace(records[i].image, i);
  const auto preds = read_predictions(predictions);
  for (const auto& p : preds) {
    if (!by_id.count(p.image)) throw Error(ErrorKind::UnknownImageId, p.image);
  }
  fs::create_directories(out_dir);
  const fs::path root = manifest.parent_path();
  parallel_for(preds.size(), jobs, [&](size_t i) {
    const auto& p = preds[i];
    const ImageBuffer image = read_png_rgb(root / p.image);
    std::vector<BoundingBox> boxes;
    for (const auto& d : p.detections) boxes.push_back(d.box);
    write_png_rgb(out_dir / saliency_png_name(p.image), obfuscate(image, boxes, cfg.obfuscation));
  });
}

std::vector<ReplayRow> cmd_replay(const RunConfig& cfg, const ReplayCommand& cmd) {
  const fs::path out = cmd.out_dir;
  auto say = [&](const std::string& msg) {
    if (cmd.verbose) std::fprintf(stderr, "[replay] %s\n", msg.c_str());
  };
  say("generating " + std::to_string(cmd.scenes) + " scenes");
  const fs::path manifest = cmd_gen(cfg, cmd.scenes, out / "data");
  const auto [train, test] = cmd_split(cfg, manifest);

  for (TrainMode m : {TrainMode::Detector, TrainMode::Saliency, TrainMode::Hybrid}) {
    say(std::string("training ") + to_string(m));
    TrainCommand t;
    t.mode = m;
    t.manifest = train;
    t.out_checkpoint = out / (std::string(to_string(m)) + ".ckpt");
    t.loss_log = out / (std::string(to_string(m)) + "_loss.csv");
    t.verbose = cmd.verbose;
    cmd_train(cfg, t);
  }

  say("predicting");
  PredictCommand p;
  p.manifest = test;
  p.jobs = cmd.jobs;
  p.checkpoint = out / "detector.ckpt";
  p.out_predictions = out / "detector_pred.jsonl";
  p.saliency_dir = out / "saliency";
  p.saliency_checkpoint = out / "saliency.ckpt";
  cmd_predict(cfg, p);
  p.checkpoint = out / "hybrid.ckpt";
  p.out_predictions = out / "hybrid_pred.jsonl";
  p.saliency_dir = out / "hybrid_saliency";
  p.saliency_checkpoint.reset();
  cmd_predict(cfg, p);

  auto gated = [&](const fs::path& preds, const fs::path& sal_dir, const std::string& stem) {
    GateCommand g{preds, sal_dir, out / (stem + "_gated.jsonl"), out / (stem + "_gate_log.jsonl")};
    cmd_gate(cfg, g);
    return g.out_predictions;
  };
  auto score = [&](const fs::path& preds, const std::string& stem) {
    return cmd_eval(cfg, preds, test, out / (stem + "_report.json")).map();
  };

  say("gating and evaluating");
  std::vector<ReplayRow> rows;
  rows.push_back({"Detector", score(out / "detector_pred.jsonl", "detector")});
  rows.push_back({"External detector", std::nullopt});
  rows.push_back({"Detector w/ MT",
                  score(gated(out / "detector_pred.jsonl", out / "saliency", "detector"), "detector_mt")});
  rows.push_back({"External detector w/ MT", std::nullopt});
  if (cmd.external_predictions) {
    rows[1].map = score(*cmd.external_predictions, "external");
    rows[3].map = score(gated(*cmd.external_predictions, out / "saliency", "external"), "external_mt");
  }
  rows.push_back({"Hybrid", score(out / "hybrid_pred.jsonl", "hybrid")});
  rows.push_back({"Hybrid w/ MT",
                  score(gated(out / "hybrid_pred.jsonl", out / "hybrid_saliency", "hybrid"), "hybrid_mt")});

  json table = json::array();
  for (const auto& r : rows) table.push_back({{"method", r.method}, {"map", r.map ? json(*r.map) : json(nullptr)}});
  write_text_atomically(out / "table1.json", table.dump(2) + "\n");
  write_text_atomically(out / "table1.md", format_replay_table(rows));
  return rows;
}

std::string format_replay_table(const std::vector<ReplayRow>& rows) {
  std::string s = "| Method | mAP (%) |\n|---|---|\n";
  char buf[32];
  for (const auto& r : rows) {
    if (r.map) {
      std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *r.map);
    } else {
      std::snprintf(buf, sizeof(buf), "n/a");
    }
    s += "| " + r.method + " | " + buf + " |\n";
  }
  return s;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"salgate: saliency-gated privacy region detection"};
  app.require_subcommand(1);
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_file, "JSON config file");
  app.add_option("--set", overrides, "override, e.g. detector.input_size=128 (repeatable)");
  int jobs = 1;
  app.add_option("-j,--jobs", jobs, "worker threads for per-image stages")->check(CLI::PositiveNumber);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "progress on stderr");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  int n = 0;
  std::string gen_out;
  gen->add_option("-n,--count", n, "number of scenes")->required()->check(CLI::PositiveNumber);
  gen->add_option("-o,--out", gen_out, "output directory")->required();
  std::optional<uint64_t> gen_seed;
  gen->add_option("--seed", gen_seed, "scene seed (data.seed)");

  auto* split_cmd = app.add_subcommand("split", "write train.jsonl / test.jsonl next to a manifest");
  std::string split_manifest;
  split_cmd->add_option("manifest", split_manifest)->required();

  auto* train = app.add_subcommand("train", "train a detector, saliency or hybrid model");
  TrainCommand tc;
  std::string mode, train_manifest, train_out;
  std::optional<std::string> resume, loss_log;
  std::optional<uint64_t> train_seed;
  std::optional<int> epochs;
  train->add_option("mode", mode, "detector | saliency | hybrid")
      ->required()
      ->check(CLI::IsMember({"detector", "saliency", "hybrid"}));
  train->add_option("-m,--manifest", train_manifest)->required();
  train->add_option("-o,--out", train_out, "checkpoint path")->required();
  train->add_option("--seed", train_seed, "training seed")->required();
  train->add_option("--epochs", epochs, "epochs (or further epochs when resuming)");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--loss-log", loss_log, "CSV of per-epoch mean loss");

  auto* pred = app.add_subcommand("predict", "run a detector or hybrid checkpoint over a manifest");
  PredictCommand pc;
  std::string pred_ckpt, pred_manifest, pred_out;
  std::optional<std::string> sal_dir, sal_ckpt;
  pred->add_option("-k,--checkpoint", pred_ckpt)->required();
  pred->add_option("-m,--manifest", pred_manifest)->required();
  pred->add_option("-o,--out", pred_out, "predictions JSON-lines")->required();
  pred->add_option("--with-saliency", sal_dir, "write saliency PNGs into this directory");
  pred->add_option("--saliency-checkpoint", sal_ckpt, "saliency model for detector checkpoints");

  auto* gate_cmd = app.add_subcommand("gate", "reject detections on salient regions");
  std::string gate_pred, gate_dir, gate_out;
  std::optional<std::string> gate_log;
  gate_cmd->add_option("-p,--predictions", gate_pred)->required();
  gate_cmd->add_option("-s,--saliency-dir", gate_dir)->required();
  gate_cmd->add_option("-o,--out", gate_out)->required();
  gate_cmd->add_option("--log", gate_log, "per-detection decision log");

  auto* eval_cmd = app.add_subcommand("eval", "mAP of predictions against a manifest");
  std::string eval_pred, eval_manifest;
  std::optional<std::string> eval_out;
  eval_cmd->add_option("-p,--predictions", eval_pred)->required();
  eval_cmd->add_option("-m,--manifest", eval_manifest)->required();
  eval_cmd->add_option("-o,--out", eval_out, "JSON report");

  auto* obf = app.add_subcommand("obfuscate", "blur or black out predicted regions");
  std::string obf_pred, obf_manifest, obf_out;
  obf->add_option("-p,--predictions", obf_pred)->required();
  obf->add_option("-m,--manifest", obf_manifest)->required();
  obf->add_option("-o,--out", obf_out, "output directory")->required();

  auto* replay = app.add_subcommand("replay", "gen, train x3, predict, gate and eval into a six-row table");
  ReplayCommand rc;
  std::string replay_out;
  std::optional<std::string> external;
  std::optional<uint64_t> replay_seed;
  replay->add_option("-o,--out", replay_out)->required();
  replay->add_option("-n,--scenes", rc.scenes, "scenes before the train/test split")->check(CLI::PositiveNumber);
  replay->add_option("--seed", replay_seed, "training seed")->required();
  replay->add_option("--external", external, "external detector predictions on the test split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_seed) overrides.push_back("train.seed=" + std::to_string(*train_seed));
    if (replay_seed) overrides.push_back("train.seed=" + std::to_string(*replay_seed));
    if (gen_seed) overrides.push_back("data.seed=" + std::to_string(*gen_seed));
    if (epochs) overrides.push_back("train.epochs=" + std::to_string(*epochs));
    const std::optional<fs::path> cfg_path = config_file ? std::optional<fs::path>(*config_file) : std::nullopt;
    const RunConfig cfg = load_run_config(cfg_path, overrides);

    if (*gen) {
      std::cout << cmd_gen(cfg, n, gen_out).string() << "\n";
    } else if (*split_cmd) {
      const auto [a, b] = cmd_split(cfg, split_manifest);
      std::cout << a.string() << "\n" << b.string() << "\n";
    } else if (*train) {
      tc.mode = parse_train_mode(mode);
      tc.manifest = train_manifest;
      tc.out_checkpoint = train_out;
      if (resume) tc.resume = *resume;
      if (loss_log) tc.loss_log = *loss_log;
      tc.verbose = verbose;
      cmd_train(cfg, tc);
    } else if (*pred) {
      pc.checkpoint = pred_ckpt;
      pc.manifest = pred_manifest;
      pc.out_predictions = pred_out;
      if (sal_dir) pc.saliency_dir = *sal_dir;
      if (sal_ckpt) pc.saliency_checkpoint = *sal_ckpt;
      pc.jobs = jobs;
      cmd_predict(cfg, pc);
    } else if (*gate_cmd) {
      GateCommand g{gate_pred, gate_dir, gate_out, std::nullopt};
      if (gate_log) g.decision_log = *gate_log;
      cmd_gate(cfg, g);
    } else if (*eval_cmd) {
      const auto report = cmd_eval(cfg, eval_pred, eval_manifest,
                                   eval_out ? std::optional<fs::path>(*eval_out) : std::nullopt);
      std::printf("mAP@%.2f %.6f (%d truths, %d detections)\n", cfg.eval.iou_threshold, report.map(),
                  report.num_truths, report.num_detections);
    } else if (*obf) {
      cmd_obfuscate(cfg, obf_pred, obf_manifest, obf_out, jobs);
    } else if (*replay) {
      rc.out_dir = replay_out;
      if (external) rc.external_predictions = *external;
      rc.jobs = jobs;
      rc.verbose = verbose;
      std::cout << format_replay_table(cmd_replay(cfg, rc));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace salgate
