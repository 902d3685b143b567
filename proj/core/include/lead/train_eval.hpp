// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lead/augment.hpp"
#include "lead/bands.hpp"
#include "lead/corpus_io.hpp"
#include "lead/metrics.hpp"
#include "lead/model.hpp"

namespace lead::train {

enum class Phase { kPretrain, kFinetune, kSupervised };
std::string_view to_string(Phase phase);

struct TrainConfig {
  Phase phase = Phase::kPretrain;
  int epochs = 50;
  std::size_t batch_size = 512;
  std::size_t group_size = 2;
  double lr = 2e-4;
  double weight_decay = 0.01;
  double grad_clip_norm = 4.0;
  int patience = 15;
  bool swa_enabled = true;
  double swa_start = 0.6;  // fraction of epochs before snapshots begin
  bool augment = true;
  aug::AugmentationParams augmentation;
  std::uint64_t seed = 41;

  static TrainConfig pretrain_defaults();
  static TrainConfig finetune_defaults();
  void validate() const;
  /// First epoch (0-based) whose end-of-epoch weights enter the SWA mean.
  int swa_start_epoch() const;
};

struct EpochLog {
  Phase phase = Phase::kPretrain;
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;  // at the last step of the epoch
  double max_grad_norm = 0.0;  // before clipping
  double max_clipped_norm = 0.0;  // after clipping
  std::size_t steps = 0;
  std::optional<double> val_mean_f1;
  std::vector<metrics::DatasetMetrics> val;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct PretrainResult {
  model::Model model;
  std::vector<EpochLog> log;
  bool used_swa = false;
};

/// Contrastive pre-training on every window of every corpus. Subjects are
/// keyed by (corpus position, subject id) so identical ids in different
/// corpora stay distinct.
PretrainResult pretrain(model::Model init, std::span<const io::Corpus* const> corpora,
                        const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct FinetuneData {
  const io::Corpus* corpus = nullptr;
  io::SplitAssignment split;
};

struct FinetuneResult {
  model::Model model;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_f1 = 0.0;
  bool used_swa = false;
};

/// Supervised training of encoder and classifier on the union of training
/// splits with early stopping on the mean validation sample macro-F1.
FinetuneResult finetune(model::Model start, std::span<const FinetuneData> data,
                        const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Throws a data error when any subject is assigned to more than one split
/// or a labelled subject has no assignment.
void check_subject_independence(const io::Corpus& corpus, const io::SplitAssignment& split);

// --- evaluation --------------------------------------------------------------

inline constexpr std::size_t kEvalBatch = 256;

std::vector<metrics::SamplePrediction> predict(const model::Model& m, const SampleList& samples);

metrics::DatasetMetrics evaluate_samples(const model::Model& m, const SampleList& samples,
                                         const io::LabelTable& labels, const std::string& dataset_id);

metrics::MetricsReport evaluate(const model::Model& m, std::span<const FinetuneData> data,
                                io::Split split);
metrics::MetricsReport evaluate(const model::Model& m, const io::Corpus& corpus,
                                const io::SplitAssignment& assignment, io::Split split);

/// Element-wise mean of the snapshots.
model::ParamStore apply_swa(std::span<const model::ParamStore> history);

// --- ablations ---------------------------------------------------------------

FrequencyBand parse_band(std::string_view name);

struct ChannelRegion {
  std::string_view name;
  std::vector<std::string_view> channels;
};
const std::vector<ChannelRegion>& channel_regions();
ChannelRegion parse_region(std::string_view name);

/// Per-window bandpass to the band followed by re-normalization. The full
/// band is the preprocessing band, so it only re-normalizes.
SampleList band_filter(const SampleList& samples, const FrequencyBand& band);
io::Corpus band_filter(const io::Corpus& corpus, const FrequencyBand& band);

/// Zeroes the region's channels (canonical montage order).
SampleList region_mask(const SampleList& samples, const ChannelRegion& region);

metrics::MetricsReport band_ablation(const model::Model& m, const io::Corpus& corpus,
                                     const io::SplitAssignment& assignment, io::Split split,
                                     const FrequencyBand& band);
metrics::MetricsReport region_ablation(const model::Model& m, const io::Corpus& corpus,
                                       const io::SplitAssignment& assignment, io::Split split,
                                       const ChannelRegion& region);

// --- representation probing ---------------------------------------------------

/// Encoder outputs h for every window, (N x 2D).
Matrix embed_samples(const model::Model& m, const SampleList& samples);

struct ProbeConfig {
  int iterations = 400;
  double lr = 0.05;
  double l2 = 1e-4;
};

struct ProbeResult {
  std::size_t n_classes = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double chance = 0.0;
};

/// Multinomial logistic regression on standardized features, trained with
/// full-batch Adam. Labels are arbitrary integers.
ProbeResult linear_probe(const Matrix& train_x, std::span<const std::int64_t> train_y,
                         const Matrix& test_x, std::span<const std::int64_t> test_y,
                         const ProbeConfig& cfg = {});

}  // namespace lead::train
