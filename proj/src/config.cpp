#include "salgate/config.hpp"

#include <fstream>

namespace salgate {

using nlohmann::json;

void RunConfig::validate() const {
  detector.validate();
  saliency.validate();
  fusion.validate();
  gate.validate();
  eval.validate();
  synthetic.validate();
  obfuscation.validate();
  if (saliency.input_size != detector.input_size) {
    throw Error(ErrorKind::ConfigMismatch, "saliency.input_size must equal detector.input_size");
  }
  if (!(split.train_fraction >= 0.0 && split.train_fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigMismatch, "split.train_fraction must lie in [0,1]");
  }
  if (train.epochs < 0 || train.batch_size <= 0 || !(train.adam.learning_rate > 0.0)) {
    throw Error(ErrorKind::ConfigMismatch, "train: epochs >= 0, batch_size > 0, learning_rate > 0");
  }
}

json detector_config_json(const DetectorConfig& c) {
  json anchors = json::array();
  for (const auto& scale : c.anchor_sizes) {
    json s = json::array();
    for (const auto& a : scale) s.push_back({a.w, a.h});
    anchors.push_back(s);
  }
  return json{{"input_size", c.input_size},       {"strides", c.strides},
              {"anchors_per_scale", c.anchors_per_scale}, {"anchor_sizes", anchors},
              {"conf_threshold", c.conf_threshold}, {"nms_iou_threshold", c.nms_iou_threshold},
              {"max_detections", c.max_detections}, {"widths", c.widths},
              {"coord_weight", c.coord_weight},   {"noobj_weight", c.noobj_weight},
              {"ignore_iou", c.ignore_iou}};
}

DetectorConfig detector_config_from_json(const json& j) {
  DetectorConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.strides = j.value("strides", c.strides);
  c.anchors_per_scale = j.value("anchors_per_scale", c.anchors_per_scale);
  if (j.contains("anchor_sizes")) {
    const auto& a = j.at("anchor_sizes");
    if (!a.is_array() || a.size() != kNumScales) {
      throw Error(ErrorKind::ConfigMismatch, "detector.anchor_sizes needs one list per scale");
    }
    for (int s = 0; s < kNumScales; ++s) {
      c.anchor_sizes[s].clear();
      for (const auto& wh : a[s]) c.anchor_sizes[s].push_back({wh.at(0).get<double>(), wh.at(1).get<double>()});
    }
  }
  c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
  c.nms_iou_threshold = j.value("nms_iou_threshold", c.nms_iou_threshold);
  c.max_detections = j.value("max_detections", c.max_detections);
  c.widths = j.value("widths", c.widths);
  c.coord_weight = j.value("coord_weight", c.coord_weight);
  c.noobj_weight = j.value("noobj_weight", c.noobj_weight);
  c.ignore_iou = j.value("ignore_iou", c.ignore_iou);
  return c;
}

json saliency_config_json(const SaliencyNetConfig& c) {
  return json{{"input_size", c.input_size},
              {"depth", c.depth},
              {"base_channels", c.base_channels},
              {"deep_supervision", c.deep_supervision}};
}

SaliencyNetConfig saliency_config_from_json(const json& j) {
  SaliencyNetConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.deep_supervision = j.value("deep_supervision", c.deep_supervision);
  return c;
}

json fusion_config_json(const FusionConfig& c) {
  return json{{"projection", c.projection == Projection::Learned1x1 ? "learned_1x1" : "broadcast_add"},
              {"detector_weight", c.detector_weight},
              {"saliency_weight", c.saliency_weight},
              {"freeze_saliency", c.freeze_saliency},
              {"train_projection", c.train_projection}};
}

FusionConfig fusion_config_from_json(const json& j) {
  FusionConfig c;
  const std::string proj = j.value("projection", std::string("learned_1x1"));
  if (proj == "learned_1x1") {
    c.projection = Projection::Learned1x1;
  } else if (proj == "broadcast_add") {
    c.projection = Projection::BroadcastAdd;
  } else {
    throw Error(ErrorKind::ConfigMismatch, "fusion.projection must be learned_1x1 or broadcast_add");
  }
  c.detector_weight = j.value("detector_weight", c.detector_weight);
  c.saliency_weight = j.value("saliency_weight", c.saliency_weight);
  c.freeze_saliency = j.value("freeze_saliency", c.freeze_saliency);
  c.train_projection = j.value("train_projection", c.train_projection);
  return c;
}

json to_json(const RunConfig& cfg) {
  const auto& s = cfg.synthetic;
  return json{
      {"detector", detector_config_json(cfg.detector)},
      {"saliency", saliency_config_json(cfg.saliency)},
      {"fusion", fusion_config_json(cfg.fusion)},
      {"gate", {{"threshold", cfg.gate.threshold}, {"reject_on_equal", cfg.gate.reject_on_equal}}},
      {"eval",
       {{"iou_threshold", cfg.eval.iou_threshold},
        {"interpolation", cfg.eval.interpolation == Interpolation::AllPoint ? "all_point" : "eleven_point"}}},
      {"data",
       {{"canvas", s.canvas},
        {"min_salient", s.min_salient},
        {"max_salient", s.max_salient},
        {"min_privacy", s.min_privacy},
        {"max_privacy", s.max_privacy},
        {"distractor_probability", s.distractor_probability},
        {"seed", s.seed},
        {"max_overlap_iou", s.max_overlap_iou},
        {"max_attempts", s.max_attempts},
        {"train_fraction", cfg.split.train_fraction},
        {"split_seed", cfg.split.split_seed}}},
      {"obfuscation",
       {{"mode", cfg.obfuscation.mode == ObfuscationMode::Blur ? "blur" : "blackout"},
        {"blur_sigma", cfg.obfuscation.blur_sigma}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"seed", cfg.train.seed},
        {"learning_rate", cfg.train.adam.learning_rate},
        {"weight_decay", cfg.train.adam.weight_decay}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  try {
    const json empty = json::object();
    auto section = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : empty; };
    cfg.detector = detector_config_from_json(section("detector"));
    cfg.saliency = saliency_config_from_json(section("saliency"));
    cfg.fusion = fusion_config_from_json(section("fusion"));
    const json& g = section("gate");
    cfg.gate.threshold = g.value("threshold", cfg.gate.threshold);
    cfg.gate.reject_on_equal = g.value("reject_on_equal", cfg.gate.reject_on_equal);
    const json& e = section("eval");
    cfg.eval.iou_threshold = e.value("iou_threshold", cfg.eval.iou_threshold);
    const std::string interp = e.value("interpolation", std::string("all_point"));
    if (interp != "all_point" && interp != "eleven_point") {
      throw Error(ErrorKind::ConfigMismatch, "eval.interpolation must be all_point or eleven_point");
    }
    cfg.eval.interpolation = interp == "all_point" ? Interpolation::AllPoint : Interpolation::ElevenPoint;
    const json& d = section("data");
    auto& s = cfg.synthetic;
    s.canvas = d.value("canvas", s.canvas);
    s.min_salient = d.value("min_salient", s.min_salient);
    s.max_salient = d.value("max_salient", s.max_salient);
    s.min_privacy = d.value("min_privacy", s.min_privacy);
    s.max_privacy = d.value("max_privacy", s.max_privacy);
    s.distractor_probability = d.value("distractor_probability", s.distractor_probability);
    s.seed = d.value("seed", s.seed);
    s.max_overlap_iou = d.value("max_overlap_iou", s.max_overlap_iou);
    s.max_attempts = d.value("max_attempts", s.max_attempts);
    cfg.split.train_fraction = d.value("train_fraction", cfg.split.train_fraction);
    cfg.split.split_seed = d.value("split_seed", cfg.split.split_seed);
    const json& o = section("obfuscation");
    const std::string mode = o.value("mode", std::string("blur"));
    if (mode != "blur" && mode != "blackout") {
      throw Error(ErrorKind::ConfigMismatch, "obfuscation.mode must be blur or blackout");
    }
    cfg.obfuscation.mode = mode == "blur" ? ObfuscationMode::Blur : ObfuscationMode::Blackout;
    cfg.obfuscation.blur_sigma = o.value("blur_sigma", cfg.obfuscation.blur_sigma);
    const json& t = section("train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.seed = t.value("seed", cfg.train.seed);
    cfg.train.adam.learning_rate = t.value("learning_rate", cfg.train.adam.learning_rate);
    cfg.train.adam.weight_decay = t.value("weight_decay", cfg.train.adam.weight_decay);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigMismatch, e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

void reject_unknown_keys(const json& known, const json& given, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!known.contains(key)) throw Error(ErrorKind::ConfigMismatch, "unknown config key '" + path + "'");
    if (known.at(key).is_object() && value.is_object()) reject_unknown_keys(known.at(key), value, path);
  }
}

}  // namespace

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides) {
  json merged = to_json(RunConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + file->string());
    json from_file;
    try {
      from_file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, file->string() + ": " + e.what());
    }
    merged.merge_patch(from_file);
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::InvalidArgument, "override must look like section.key=value: " + ov);
    }
    const std::string key = ov.substr(0, eq), raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    std::string pointer = "/" + key;
    for (char& c : pointer) {
      if (c == '.') c = '/';
    }
    merged[json::json_pointer(pointer)] = value;
  }
  reject_unknown_keys(to_json(RunConfig{}), merged, "");
  return run_config_from_json(merged);
}

}  // namespace salgate
