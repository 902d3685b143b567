// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lead/config.hpp"

namespace lead::cli {

/// Options shared by every subcommand after flag parsing.
struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};

struct SynthOptions {
  bool raw = false;
  double raw_fs = 256.0;
  std::vector<std::string> raw_channels;
};

struct PreprocessOptions {
  std::filesystem::path input;
  std::filesystem::path montage;
};

struct TrainOptions {
  std::vector<std::filesystem::path> corpora;
  std::filesystem::path init;
  bool supervised = false;
};

struct EvalOptions {
  std::vector<std::filesystem::path> corpora;
  std::filesystem::path checkpoint;
  std::string split;
  std::string band;
  std::string region;
};

/// Loads --config (or defaults) and applies --seed.
config::RunConfig resolve_config(const CommonOptions& common);

int cmd_synth(const CommonOptions& common, const SynthOptions& opts);
int cmd_preprocess(const CommonOptions& common, const PreprocessOptions& opts);
int cmd_pretrain(const CommonOptions& common, const TrainOptions& opts);
int cmd_finetune(const CommonOptions& common, const TrainOptions& opts);
int cmd_evaluate(const CommonOptions& common, const EvalOptions& opts);
int cmd_ablate(const CommonOptions& common, const EvalOptions& opts);

}  // namespace lead::cli
