// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lead/corpus_io.hpp"
#include "lead/model.hpp"
#include "lead/signal_prep.hpp"
#include "lead/synth.hpp"
#include "lead/train_eval.hpp"

namespace lead::config {

/// Evaluation and ablation options shared by `evaluate` and `ablate`.
struct EvalConfig {
  io::Split split = io::Split::kTest;
  std::string band = "all";
  std::string region = "none";
};

/// Everything a run needs. JSON sections: preprocess, synth, model, pretrain,
/// finetune, augment, split, corpora, evaluation. Missing keys keep their
/// defaults; unknown keys are rejected.
struct RunConfig {
  prep::PreprocessConfig preprocess;
  io::SynthSpec synth;
  model::ModelConfig model;
  train::TrainConfig pretrain = train::TrainConfig::pretrain_defaults();
  train::TrainConfig finetune = train::TrainConfig::finetune_defaults();
  io::SplitRatios split_ratios;
  std::uint64_t split_seed = 41;
  std::vector<std::string> corpora;
  EvalConfig evaluation;

  void validate() const;
  /// Applies one seed to synthesis, splitting and both training phases.
  void set_seed(std::uint64_t seed);
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& cfg);

std::string model_config_to_json(const model::ModelConfig& cfg);
model::ModelConfig model_config_from_json(const std::string& text);

void validate(const io::SplitRatios& ratios);

}  // namespace lead::config
