// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "lead/checkpoint.hpp"
#include "lead/error.hpp"
#include "lead/raw_io.hpp"
#include "lead/synth.hpp"
#include "lead/train_eval.hpp"

namespace lead::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path prepare_out(const CommonOptions& common) {
  if (common.out.empty()) fail(ErrorKind::kConfig, "--out is required");
  std::error_code ec;
  fs::create_directories(common.out, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create output directory " + common.out.string() + ": " + ec.message());
  return common.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

/// Appends one JSON object per line.
class JsonLines {
 public:
  explicit JsonLines(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) fail(ErrorKind::kIo, "cannot write " + path.string());
  }
  void write(const json& record) { out_ << record.dump() << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

void print_summary(const io::Corpus& c) {
  std::printf("%s: %zu subjects, %zu samples (%g Hz, %u channels, %u timesteps per sample)\n",
              c.manifest.dataset_id.c_str(), c.labels.size(), c.samples.size(),
              c.manifest.sampling_rate, c.manifest.n_channels, c.manifest.n_timesteps);
}

std::vector<io::Corpus> load_corpora(const std::vector<fs::path>& flags, const config::RunConfig& cfg) {
  std::vector<fs::path> roots = flags;
  if (roots.empty())
    for (const auto& c : cfg.corpora) roots.emplace_back(c);
  if (roots.empty()) fail(ErrorKind::kConfig, "no corpus given (use --corpus or the config's corpora list)");
  std::vector<io::Corpus> out;
  for (const auto& root : roots) {
    spdlog::info("loading corpus {}", root.string());
    out.push_back(io::load_corpus(root));
  }
  return out;
}

std::string describe(const model::ModelConfig& c) {
  std::ostringstream s;
  s << "d_model=" << c.d_model << " layers=" << c.layers << " heads=" << c.heads << " d_ff=" << c.d_ff
    << " patch_len=" << c.patch_len << " target_channels=" << c.target_channels
    << " n_classes=" << c.n_classes << " seq_len=" << c.seq_len << " n_channels=" << c.n_channels;
  return s.str();
}

/// Loads a checkpoint and, when a config file was given, requires its model
/// section to describe the same architecture.
model::Model load_checkpoint(const fs::path& path, const CommonOptions& common,
                             const config::RunConfig& cfg) {
  if (path.empty()) fail(ErrorKind::kConfig, "--ckpt is required");
  model::Model m = ckpt::load(path);
  if (!common.config.empty()) {
    auto a = m.config();
    auto b = cfg.model;
    // Loss and regularization settings do not change the parameter layout.
    a.tau = b.tau, a.lambda1 = b.lambda1, a.lambda2 = b.lambda2, a.dropout = b.dropout;
    if (!(a == b))
      fail(ErrorKind::kShape, "checkpoint " + path.string() + " has model " + describe(m.config()) +
                                  " but the config asks for " + describe(cfg.model));
  }
  return m;
}

std::vector<train::FinetuneData> split_all(const std::vector<io::Corpus>& corpora,
                                           const config::RunConfig& cfg) {
  std::vector<train::FinetuneData> data;
  for (const auto& c : corpora) {
    auto split = io::split_subjects(c.labels, cfg.split_ratios, cfg.split_seed, c.manifest.dataset_id);
    for (const auto& w : split.warnings) spdlog::warn("{}: {}", c.manifest.dataset_id, w);
    data.push_back({&c, std::move(split)});
  }
  return data;
}

json split_json(const std::vector<train::FinetuneData>& data) {
  json j = json::object();
  for (const auto& d : data) {
    json s = json::object();
    for (auto split : {io::Split::kTrain, io::Split::kVal, io::Split::kTest})
      s[std::string(io::to_string(split))] = d.split.subjects(split);
    j[d.corpus->manifest.dataset_id] = s;
  }
  return j;
}

io::Split resolve_split(const EvalOptions& opts, const config::RunConfig& cfg) {
  return opts.split.empty() ? cfg.evaluation.split : io::parse_split(opts.split);
}

}  // namespace

config::RunConfig resolve_config(const CommonOptions& common) {
  config::RunConfig cfg = common.config.empty() ? config::RunConfig{} : config::load_run_config(common.config);
  if (common.seed) cfg.set_seed(*common.seed);
  cfg.validate();
  return cfg;
}

int cmd_synth(const CommonOptions& common, const SynthOptions& opts) {
  const auto cfg = resolve_config(common);
  const fs::path out = prepare_out(common);
  if (!opts.raw) {
    const io::Corpus corpus = io::synth_generate(cfg.synth);
    io::write_corpus(corpus, out);
    print_summary(corpus);
    return 0;
  }
  const auto& channels = opts.raw_channels.empty() ? prep::Montage::canonical_names() : opts.raw_channels;
  const auto recordings = io::synth_raw(cfg.synth, opts.raw_fs, channels);
  io::RawIndex index;
  index.dataset_id = cfg.synth.dataset_id;
  index.sampling_rate = opts.raw_fs;
  for (int c = 0; c < cfg.synth.n_classes; ++c) index.class_names[c] = c == 0 ? "HC" : c == 1 ? "AD" : "C" + std::to_string(c);
  for (const auto& rec : recordings) {
    char name[32];
    std::snprintf(name, sizeof name, "sub-%04d.csv", rec.tag.subject_id);
    io::write_raw_csv(rec.trial, out / name);
    index.subjects.push_back({rec.tag.subject_id, rec.tag.label, {name}});
  }
  io::write_raw_index(index, out);
  std::printf("%s: %zu raw recordings at %g Hz with %zu channels\n", index.dataset_id.c_str(),
              recordings.size(), opts.raw_fs, channels.size());
  return 0;
}

int cmd_preprocess(const CommonOptions& common, const PreprocessOptions& opts) {
  const auto cfg = resolve_config(common);
  if (opts.input.empty()) fail(ErrorKind::kConfig, "--input is required");
  const fs::path out = prepare_out(common);
  io::Corpus corpus;
  if (opts.montage.empty()) {
    corpus = io::preprocess_raw_dataset(opts.input, cfg.preprocess);
  } else {
    const auto coords = prep::load_coordinate_table(opts.montage);
    corpus = io::preprocess_raw_dataset(opts.input, cfg.preprocess, coords, prep::Montage::from_table(coords));
  }
  io::write_corpus(corpus, out);
  print_summary(corpus);
  return 0;
}

int cmd_pretrain(const CommonOptions& common, const TrainOptions& opts) {
  const auto cfg = resolve_config(common);
  const auto corpora = load_corpora(opts.corpora, cfg);
  const fs::path out = prepare_out(common);
  write_text(out / "config.json", config::dump_run_config(cfg));

  std::vector<const io::Corpus*> ptrs;
  for (const auto& c : corpora) ptrs.push_back(&c);
  model::Model init = opts.init.empty() ? model::Model(cfg.model, cfg.pretrain.seed)
                                        : load_checkpoint(opts.init, common, cfg);
  JsonLines log(out / "metrics.jsonl");
  const auto result = train::pretrain(std::move(init), ptrs, cfg.pretrain, [&](const train::EpochLog& e) {
    spdlog::info("pretrain epoch {} loss {:.6f} lr {:.3e} grad {:.3f}", e.epoch, e.train_loss, e.lr,
                 e.max_grad_norm);
    log.write({{"phase", "pretrain"},
               {"epoch", e.epoch},
               {"dataset", "all"},
               {"train_loss", e.train_loss},
               {"lr", e.lr},
               {"max_grad_norm", e.max_grad_norm},
               {"max_clipped_norm", e.max_clipped_norm},
               {"steps", e.steps}});
  });
  ckpt::save(result.model, out / "pretrained.leadw");
  std::printf("pretrained %zu epochs%s -> %s\n", result.log.size(), result.used_swa ? " (SWA)" : "",
              (out / "pretrained.leadw").string().c_str());
  return 0;
}

int cmd_finetune(const CommonOptions& common, const TrainOptions& opts) {
  auto cfg = resolve_config(common);
  const bool supervised = opts.supervised || cfg.finetune.phase == train::Phase::kSupervised;
  if (supervised && !opts.init.empty())
    fail(ErrorKind::kConfig, "--init cannot be combined with supervised training from scratch");
  if (!supervised && opts.init.empty())
    fail(ErrorKind::kConfig, "--init is required unless --supervised is given");
  cfg.finetune.phase = supervised ? train::Phase::kSupervised : train::Phase::kFinetune;

  const auto corpora = load_corpora(opts.corpora, cfg);
  const auto data = split_all(corpora, cfg);
  const fs::path out = prepare_out(common);
  write_text(out / "config.json", config::dump_run_config(cfg));
  write_text(out / "splits.json", split_json(data).dump(2) + "\n");

  model::Model start = supervised ? model::Model(cfg.model, cfg.finetune.seed) : load_checkpoint(opts.init, common, cfg);
  JsonLines log(out / "metrics.jsonl");
  const std::string phase(train::to_string(cfg.finetune.phase));
  const auto result = train::finetune(std::move(start), data, cfg.finetune, [&](const train::EpochLog& e) {
    spdlog::info("{} epoch {} loss {:.6f} val mean F1 {:.4f}", phase, e.epoch, e.train_loss,
                 e.val_mean_f1.value_or(0.0));
    for (const auto& d : e.val)
      log.write({{"phase", phase},
                 {"epoch", e.epoch},
                 {"dataset", d.dataset_id},
                 {"train_loss", e.train_loss},
                 {"lr", e.lr},
                 {"val_sample_accuracy", d.sample_accuracy},
                 {"val_sample_macro_f1", d.sample_macro_f1},
                 {"val_subject_accuracy", d.subject_accuracy},
                 {"val_subject_macro_f1", d.subject_macro_f1}});
  });
  ckpt::save(result.model, out / "finetuned.leadw");
  json summary{{"best_epoch", result.best_epoch},
               {"best_val_mean_f1", result.best_val_f1},
               {"epochs_run", result.log.size()},
               {"used_swa", result.used_swa}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::printf("%s: best epoch %d, validation mean F1 %.4f%s -> %s\n", phase.c_str(), result.best_epoch,
              result.best_val_f1, result.used_swa ? " (SWA)" : "", (out / "finetuned.leadw").string().c_str());
  return 0;
}

int cmd_evaluate(const CommonOptions& common, const EvalOptions& opts) {
  const auto cfg = resolve_config(common);
  const model::Model m = load_checkpoint(opts.checkpoint, common, cfg);
  const auto corpora = load_corpora(opts.corpora, cfg);
  const auto data = split_all(corpora, cfg);
  const fs::path out = prepare_out(common);
  const auto report = train::evaluate(m, data, resolve_split(opts, cfg));
  const std::string text = metrics::to_json(report) + "\n";
  write_text(out / "report.json", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_ablate(const CommonOptions& common, const EvalOptions& opts) {
  const auto cfg = resolve_config(common);
  const model::Model m = load_checkpoint(opts.checkpoint, common, cfg);
  const auto corpora = load_corpora(opts.corpora, cfg);
  const auto data = split_all(corpora, cfg);
  const fs::path out = prepare_out(common);
  const io::Split split = resolve_split(opts, cfg);
  const auto band = train::parse_band(opts.band.empty() ? cfg.evaluation.band : opts.band);
  const auto region = train::parse_region(opts.region.empty() ? cfg.evaluation.region : opts.region);

  metrics::MetricsReport report;
  report.split = std::string(io::to_string(split));
  for (const auto& d : data) {
    const io::Corpus filtered = train::band_filter(*d.corpus, band);
    auto r = train::region_ablation(m, filtered, d.split, split, region);
    report.datasets.push_back(std::move(r.datasets.front()));
  }
  json j{{"band", band.name}, {"region", region.name}, {"report", json::parse(metrics::to_json(report))}};
  const std::string text = j.dump(2) + "\n";
  write_text(out / "ablation.json", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

}  // namespace lead::cli
