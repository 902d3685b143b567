// SPDX-License-Identifier: Apache-2.0
#include "lead/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lead/error.hpp"

namespace lead::config {
namespace {

using nlohmann::json;

/// Reads fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::kConfig, path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::kConfig, path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(ErrorKind::kConfig, "unknown key " + path_ + "." + key);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json model_to_json(const model::ModelConfig& c) {
  return {{"d_model", c.d_model},   {"layers", c.layers},
          {"heads", c.heads},       {"d_ff", c.d_ff},
          {"patch_len", c.patch_len}, {"target_channels", c.target_channels},
          {"n_classes", c.n_classes}, {"seq_len", c.seq_len},
          {"n_channels", c.n_channels}, {"tau", c.tau},
          {"lambda1", c.lambda1},   {"lambda2", c.lambda2},
          {"dropout", c.dropout}};
}

model::ModelConfig model_from_json(const json& j, const std::string& path) {
  model::ModelConfig c;
  Section s(j, path);
  s.get("d_model", c.d_model);
  s.get("layers", c.layers);
  s.get("heads", c.heads);
  s.get("d_ff", c.d_ff);
  s.get("patch_len", c.patch_len);
  s.get("target_channels", c.target_channels);
  s.get("n_classes", c.n_classes);
  s.get("seq_len", c.seq_len);
  s.get("n_channels", c.n_channels);
  s.get("tau", c.tau);
  s.get("lambda1", c.lambda1);
  s.get("lambda2", c.lambda2);
  s.get("dropout", c.dropout);
  s.finish();
  return c;
}

json augment_to_json(const aug::AugmentationParams& a) {
  json kinds = json::array();
  for (auto k : a.enabled_kinds) kinds.push_back(std::string(aug::to_string(k)));
  return {{"flip_prob", a.flip_prob},
          {"mask_ratio", a.mask_ratio},
          {"jitter_scale", a.jitter_scale},
          {"kinds", kinds}};
}

void augment_from_json(const json& j, aug::AugmentationParams& a) {
  Section s(j, "augment");
  s.get("flip_prob", a.flip_prob);
  s.get("mask_ratio", a.mask_ratio);
  s.get("jitter_scale", a.jitter_scale);
  std::vector<std::string> kinds;
  if (const json* k = s.child("kinds")) {
    if (!k->is_array()) fail(ErrorKind::kConfig, "augment.kinds must be an array");
    a.enabled_kinds.clear();
    for (const auto& name : *k) {
      if (!name.is_string()) fail(ErrorKind::kConfig, "augment.kinds entries must be strings");
      a.enabled_kinds.push_back(aug::parse_kind(name.get<std::string>()));
    }
  }
  s.finish();
}

json train_to_json(const train::TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"group_size", t.group_size},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"grad_clip_norm", t.grad_clip_norm},
          {"patience", t.patience},
          {"swa_enabled", t.swa_enabled},
          {"swa_start", t.swa_start},
          {"augment", t.augment},
          {"seed", t.seed}};
}

void train_from_json(const json& j, train::TrainConfig& t, const std::string& path) {
  Section s(j, path);
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  s.get("group_size", t.group_size);
  s.get("lr", t.lr);
  s.get("weight_decay", t.weight_decay);
  s.get("grad_clip_norm", t.grad_clip_norm);
  s.get("patience", t.patience);
  s.get("swa_enabled", t.swa_enabled);
  s.get("swa_start", t.swa_start);
  s.get("augment", t.augment);
  s.get("seed", t.seed);
  if (path == "finetune") {
    bool supervised = t.phase == train::Phase::kSupervised;
    s.get("supervised", supervised);
    t.phase = supervised ? train::Phase::kSupervised : train::Phase::kFinetune;
  }
  s.finish();
}

json synth_to_json(const io::SynthSpec& sp) {
  return {{"dataset_id", sp.dataset_id},
          {"n_subjects", sp.n_subjects},
          {"n_classes", sp.n_classes},
          {"class_band_power", sp.class_band_power},
          {"base_band_power", sp.base_band_power},
          {"subject_nuisance_strength", sp.subject_nuisance_strength},
          {"trial_seconds", sp.trial_seconds},
          {"seed", sp.seed},
          {"signal_channels", sp.signal_channels},
          {"fingerprint_sources", sp.fingerprint_sources},
          {"white_noise", sp.white_noise}};
}

void synth_from_json(const json& j, io::SynthSpec& sp) {
  Section s(j, "synth");
  s.get("dataset_id", sp.dataset_id);
  s.get("n_subjects", sp.n_subjects);
  s.get("n_classes", sp.n_classes);
  s.get("class_band_power", sp.class_band_power);
  s.get("base_band_power", sp.base_band_power);
  s.get("subject_nuisance_strength", sp.subject_nuisance_strength);
  s.get("trial_seconds", sp.trial_seconds);
  s.get("seed", sp.seed);
  s.get("signal_channels", sp.signal_channels);
  s.get("fingerprint_sources", sp.fingerprint_sources);
  s.get("white_noise", sp.white_noise);
  s.finish();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, what + " is not valid JSON: " + e.what());
  }
}

}  // namespace

void validate(const io::SplitRatios& r) {
  if (!(r.train > 0.0) || !(r.val >= 0.0) || !(r.test >= 0.0))
    fail(ErrorKind::kConfig, "split ratios must be non-negative with train > 0");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "split ratios must sum to 1");
}

void RunConfig::validate() const {
  prep::validate(preprocess);
  synth.validate();
  model.validate();
  pretrain.validate();
  finetune.validate();
  config::validate(split_ratios);
  train::parse_band(evaluation.band);
  train::parse_region(evaluation.region);
  if (synth.n_classes > model.n_classes)
    fail(ErrorKind::kConfig, "model.n_classes is smaller than synth.n_classes");
}

void RunConfig::set_seed(std::uint64_t seed) {
  synth.seed = seed;
  split_seed = seed;
  pretrain.seed = seed;
  finetune.seed = seed;
}

std::string model_config_to_json(const model::ModelConfig& cfg) { return model_to_json(cfg).dump(); }

model::ModelConfig model_config_from_json(const std::string& text) {
  auto cfg = model_from_json(parse_json(text, "model config"), "model");
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& text) {
  const json j = parse_json(text, "run config");
  RunConfig cfg;
  Section root(j, "config");
  if (const json* p = root.child("preprocess")) {
    Section s(*p, "preprocess");
    s.get("target_fs", cfg.preprocess.target_fs);
    s.get("lo", cfg.preprocess.lo);
    s.get("hi", cfg.preprocess.hi);
    s.get("win", cfg.preprocess.win);
    s.get("stride", cfg.preprocess.stride);
    s.get("filter_order", cfg.preprocess.filter_order);
    s.finish();
  }
  if (const json* p = root.child("synth")) synth_from_json(*p, cfg.synth);
  if (const json* p = root.child("model")) cfg.model = model_from_json(*p, "model");
  if (const json* p = root.child("pretrain")) train_from_json(*p, cfg.pretrain, "pretrain");
  if (const json* p = root.child("finetune")) train_from_json(*p, cfg.finetune, "finetune");
  if (const json* p = root.child("augment")) {
    augment_from_json(*p, cfg.pretrain.augmentation);
    cfg.finetune.augmentation = cfg.pretrain.augmentation;
  }
  if (const json* p = root.child("split")) {
    Section s(*p, "split");
    s.get("train", cfg.split_ratios.train);
    s.get("val", cfg.split_ratios.val);
    s.get("test", cfg.split_ratios.test);
    s.get("seed", cfg.split_seed);
    s.finish();
  }
  root.get("corpora", cfg.corpora);
  if (const json* p = root.child("evaluation")) {
    Section s(*p, "evaluation");
    std::string split(io::to_string(cfg.evaluation.split));
    s.get("split", split);
    s.get("band", cfg.evaluation.band);
    s.get("region", cfg.evaluation.region);
    s.finish();
    try {
      cfg.evaluation.split = io::parse_split(split);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, std::string("evaluation.split: ") + e.what());
    }
  }
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string dump_run_config(const RunConfig& cfg) {
  json finetune = train_to_json(cfg.finetune);
  finetune["supervised"] = cfg.finetune.phase == train::Phase::kSupervised;
  const json j = {
      {"preprocess",
       {{"target_fs", cfg.preprocess.target_fs},
        {"lo", cfg.preprocess.lo},
        {"hi", cfg.preprocess.hi},
        {"win", cfg.preprocess.win},
        {"stride", cfg.preprocess.stride},
        {"filter_order", cfg.preprocess.filter_order}}},
      {"synth", synth_to_json(cfg.synth)},
      {"model", model_to_json(cfg.model)},
      {"pretrain", train_to_json(cfg.pretrain)},
      {"finetune", finetune},
      {"augment", augment_to_json(cfg.pretrain.augmentation)},
      {"split",
       {{"train", cfg.split_ratios.train},
        {"val", cfg.split_ratios.val},
        {"test", cfg.split_ratios.test},
        {"seed", cfg.split_seed}}},
      {"corpora", cfg.corpora},
      {"evaluation",
       {{"split", std::string(io::to_string(cfg.evaluation.split))},
        {"band", cfg.evaluation.band},
        {"region", cfg.evaluation.region}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace lead::config
