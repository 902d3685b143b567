// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <cstdlib>
#include <exception>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "lead/error.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfigError = 2,
  kDataError = 3,
  kFormatError = 4,
  kShapeError = 5,
  kNumericError = 6,
};

int exit_code(lead::ErrorKind kind) {
  switch (kind) {
    case lead::ErrorKind::kConfig:
      return kConfigError;
    case lead::ErrorKind::kData:
      return kDataError;
    case lead::ErrorKind::kFormat:
    case lead::ErrorKind::kLength:
    case lead::ErrorKind::kVersion:
    case lead::ErrorKind::kIo:
      return kFormatError;
    case lead::ErrorKind::kShape:
    case lead::ErrorKind::kDimensionMismatch:
      return kShapeError;
    case lead::ErrorKind::kNumeric:
      return kNumericError;
  }
  return kOther;
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("lead");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("LEAD_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  namespace cli = lead::cli;

  CLI::App app{"LEAD: contrastive EEG pre-training, fine-tuning and evaluation on 19-channel corpora"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 1 unexpected failure, 2 configuration, 3 data, 4 file format or I/O, 5 shape, "
      "6 numeric.\nLEAD_LOG_LEVEL=trace|debug|info|warn|error|off sets log verbosity (stderr).");

  cli::CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run config; missing keys keep their defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Seed for synthesis, splitting and training (overrides the config)");
    sub->add_option("--out", common.out, "Output directory (created if needed)")->required();
  };

  cli::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus (or raw CSV recordings with --raw)");
  add_common(s);
  s->add_flag("--raw", synth.raw, "Write unprocessed CSV recordings and raw.json instead of a corpus");
  s->add_option("--raw-fs", synth.raw_fs, "Sampling rate of raw recordings in Hz")->capture_default_str();
  s->add_option("--raw-channels", synth.raw_channels, "Electrode names of raw recordings (default: the 19 montage channels)")
      ->delimiter(',');

  cli::PreprocessOptions prep;
  auto* p = app.add_subcommand("preprocess", "Resample, filter, align, segment and normalize a raw directory");
  add_common(p);
  p->add_option("--input", prep.input, "Raw directory holding raw.json and CSV recordings")->required();
  p->add_option("--montage", prep.montage, "Electrode coordinate table (name x y z per line); default: built-in 10-20")
      ->check(CLI::ExistingFile);

  cli::TrainOptions pre;
  auto* pt = app.add_subcommand("pretrain", "Contrastive pre-training on one or more corpora");
  add_common(pt);
  pt->add_option("--corpus", pre.corpora, "Corpus directory (repeatable)");
  pt->add_option("--init", pre.init, "Start from this LEADW checkpoint")->check(CLI::ExistingFile);

  cli::TrainOptions fine;
  auto* ft = app.add_subcommand("finetune", "Unified supervised fine-tuning with early stopping");
  add_common(ft);
  ft->add_option("--corpus", fine.corpora, "Corpus directory (repeatable for unified fine-tuning)");
  ft->add_option("--init", fine.init, "Pre-trained LEADW checkpoint")->check(CLI::ExistingFile);
  ft->add_flag("--supervised", fine.supervised, "Train from a random initialization instead of --init");

  cli::EvalOptions eval;
  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--ckpt", eval.checkpoint, "LEADW checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", eval.corpora, "Corpus directory (repeatable)");
    sub->add_option("--split", eval.split, "train, val or test (default: the config's evaluation.split)");
  };
  auto* ev = app.add_subcommand("evaluate", "Sample- and subject-level metrics on one split");
  add_common(ev);
  add_eval(ev);

  auto* ab = app.add_subcommand("ablate", "Evaluate with a frequency band kept and/or a channel region masked");
  add_common(ab);
  add_eval(ab);
  ab->add_option("--band", eval.band, "delta, theta, alpha, beta, gamma or all");
  ab->add_option("--region", eval.region, "frontopolar, frontal, temporal, parietal, occipital, central or none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (s->parsed()) return cli::cmd_synth(common, synth);
    if (p->parsed()) return cli::cmd_preprocess(common, prep);
    if (pt->parsed()) return cli::cmd_pretrain(common, pre);
    if (ft->parsed()) return cli::cmd_finetune(common, fine);
    if (ev->parsed()) return cli::cmd_evaluate(common, eval);
    if (ab->parsed()) return cli::cmd_ablate(common, eval);
  } catch (const lead::Error& e) {
    spdlog::error("{} error: {}", lead::to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
  return kOther;
}
