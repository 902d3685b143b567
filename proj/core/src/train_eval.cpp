// SPDX-License-Identifier: Apache-2.0
#include "lead/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "lead/batching.hpp"
#include "lead/error.hpp"
#include "lead/montage.hpp"
#include "lead/objective.hpp"
#include "lead/optim.hpp"
#include "lead/signal_prep.hpp"

namespace lead::train {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kPretrain: return "pretrain";
    case Phase::kFinetune: return "finetune";
    case Phase::kSupervised: return "supervised";
  }
  return "unknown";
}

TrainConfig TrainConfig::pretrain_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::finetune_defaults() {
  TrainConfig c;
  c.phase = Phase::kFinetune;
  c.epochs = 100;
  c.batch_size = 128;
  c.lr = 1e-4;
  c.augment = false;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::kConfig, "batch_size must be >= 1");
  if (group_size < 1 || batch_size % group_size != 0)
    fail(ErrorKind::kConfig, "batch_size must be a positive multiple of group_size");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::kConfig, "lr must be >= 0");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::kConfig, "weight_decay must be >= 0");
  if (!(grad_clip_norm > 0.0)) fail(ErrorKind::kConfig, "grad_clip_norm must be positive");
  if (patience < 0 || patience > epochs)
    fail(ErrorKind::kConfig, "patience must satisfy 0 <= patience <= epochs");
  if (!(swa_start >= 0.0 && swa_start <= 1.0)) fail(ErrorKind::kConfig, "swa_start must lie in [0, 1]");
  if (augment) augmentation.validate();
}

int TrainConfig::swa_start_epoch() const {
  return std::min(epochs - 1, static_cast<int>(std::floor(swa_start * epochs)));
}

namespace {

struct StepStats {
  double loss = 0.0;
  double norm = 0.0;
  double clipped = 0.0;
};

StepStats optimizer_step(nn::Tape& tape, const nn::Var& loss, model::Model& m, optim::AdamW& opt,
                         double lr, double clip) {
  if (!std::isfinite(loss->value(0, 0))) fail(ErrorKind::kNumeric, "training loss is not finite");
  tape.backward(loss);
  StepStats s;
  s.loss = loss->value(0, 0);
  s.norm = optim::clip_grad_norm(m.params(), clip);
  s.clipped = optim::global_grad_norm(m.params());
  opt.step(lr);
  m.params().zero_grad();
  tape.clear();
  return s;
}

std::int64_t subject_key(std::size_t corpus_index, std::int32_t subject_id) {
  return (static_cast<std::int64_t>(corpus_index) << 32) | static_cast<std::uint32_t>(subject_id);
}

Matrix augment_batch(const Matrix& x, Eigen::Index t, const aug::AugmentationParams& params, Rng& rng,
                     Matrix* second) {
  const Eigen::Index b = x.rows() / t;
  Matrix a(x.rows(), x.cols());
  if (second) second->resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const Matrix window = x.middleRows(i * t, t);
    if (second) {
      auto [va, vb] = aug::make_views(window, params, rng);
      a.middleRows(i * t, t) = va;
      second->middleRows(i * t, t) = vb;
    } else {
      const auto kind = params.enabled_kinds[rng.below(params.enabled_kinds.size())];
      a.middleRows(i * t, t) = aug::apply(window, kind, params, rng);
    }
  }
  return a;
}

}  // namespace

// --- pre-training --------------------------------------------------------------

PretrainResult pretrain(model::Model init, std::span<const io::Corpus* const> corpora,
                        const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  std::vector<const EpochSample*> samples;
  std::vector<std::int64_t> keys;
  for (std::size_t ci = 0; ci < corpora.size(); ++ci) {
    for (const auto& s : corpora[ci]->samples) {
      samples.push_back(&s);
      keys.push_back(subject_key(ci, s.subject_id));
    }
  }
  if (samples.empty()) fail(ErrorKind::kData, "pre-training corpus is empty");

  PretrainResult result{std::move(init), {}, false};
  model::Model& m = result.model;
  const auto& mc = m.config();
  const Eigen::Index t = mc.seq_len;
  const bool drop_last = samples.size() >= cfg.batch_size;
  const std::size_t per_epoch =
      drop_last ? samples.size() / cfg.batch_size : 1;
  const std::size_t total = per_epoch * static_cast<std::size_t>(cfg.epochs);

  optim::AdamW opt(m.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  optim::SwaAverager swa;
  nn::Tape tape;
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t eseed = batch::epoch_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    const auto plan = batch::shuffle_indices(keys, cfg.batch_size, cfg.group_size, eseed);
    const auto batches = batch::make_batches(plan, drop_last);
    EpochLog log;
    log.phase = Phase::kPretrain;
    log.epoch = epoch;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      std::vector<const EpochSample*> ptrs;
      std::vector<std::int64_t> ids;
      for (std::size_t i : idx) {
        ptrs.push_back(samples[i]);
        ids.push_back(keys[i]);
      }
      const Matrix x = model::stack(ptrs);
      Rng rng = Rng(eseed, 0xA5).fork(bi);
      Matrix xb;
      Matrix xa = cfg.augment ? augment_batch(x, t, cfg.augmentation, rng, &xb) : x;
      if (!cfg.augment) xb = x;
      Matrix both(2 * x.rows(), x.cols());
      both << xa, xb;
      const auto b = static_cast<Eigen::Index>(idx.size());
      auto h = m.encode(tape, both, 2 * b, true, &rng);
      auto z = m.project(tape, h);
      auto loss = obj::joint_loss_op(tape, z, ids, mc.tau, mc.lambda1, mc.lambda2);
      log.lr = optim::cosine_lr(cfg.lr, step++, total);
      const StepStats s = optimizer_step(tape, loss, m, opt, log.lr, cfg.grad_clip_norm);
      log.train_loss += s.loss;
      log.max_grad_norm = std::max(log.max_grad_norm, s.norm);
      log.max_clipped_norm = std::max(log.max_clipped_norm, s.clipped);
      ++log.steps;
    }
    log.train_loss /= static_cast<double>(std::max<std::size_t>(log.steps, 1));
    if (cfg.swa_enabled && epoch >= cfg.swa_start_epoch()) swa.update(m.params());
    if (on_epoch) on_epoch(log);
    result.log.push_back(std::move(log));
  }
  if (cfg.swa_enabled && swa.count() > 0) {
    m.load_values(swa.average());
    result.used_swa = true;
  }
  return result;
}

// --- fine-tuning -----------------------------------------------------------------

void check_subject_independence(const io::Corpus& corpus, const io::SplitAssignment& split) {
  for (const auto& row : corpus.labels.rows)
    if (!split.by_subject.count(row.subject_id))
      fail(ErrorKind::kData, corpus.manifest.dataset_id + ": subject " +
                                 std::to_string(row.subject_id) + " has no split");
  std::map<std::int32_t, io::Split> seen;
  for (const auto& s : corpus.samples) {
    const io::Split sp = split.of(s.subject_id);
    const auto [it, inserted] = seen.emplace(s.subject_id, sp);
    if (!inserted && it->second != sp)
      fail(ErrorKind::kData, corpus.manifest.dataset_id + ": subject " +
                                 std::to_string(s.subject_id) + " spans several splits");
  }
}

FinetuneResult finetune(model::Model start, std::span<const FinetuneData> data,
                        const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) fail(ErrorKind::kData, "fine-tuning needs at least one corpus");
  std::vector<const EpochSample*> train;
  for (const auto& d : data) {
    if (!d.corpus) fail(ErrorKind::kData, "null corpus");
    if (d.corpus->labels.rows.empty()) fail(ErrorKind::kData, d.corpus->manifest.dataset_id + ": no labels");
    check_subject_independence(*d.corpus, d.split);
    for (const auto& s : d.corpus->samples)
      if (d.split.of(s.subject_id) == io::Split::kTrain) train.push_back(&s);
  }
  if (train.empty()) fail(ErrorKind::kData, "no training windows");

  FinetuneResult result{std::move(start), {}, -1, -1.0, false};
  model::Model& m = result.model;
  if (m.config().n_classes < 2) fail(ErrorKind::kConfig, "classifier needs >= 2 classes");
  for (const auto* s : train)
    if (s->label < 0 || s->label >= m.config().n_classes)
      fail(ErrorKind::kData, "label " + std::to_string(s->label) + " outside the classifier range");

  const Eigen::Index t = m.config().seq_len;
  const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * static_cast<std::size_t>(cfg.epochs);
  optim::AdamW opt(m.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  optim::SwaAverager swa;
  model::ParamStore best = m.params().clone();
  int stale = 0;
  nn::Tape tape;
  std::size_t step = 0;

  auto validation = [&](const model::Model& mm, EpochLog* log) {
    const auto report = evaluate(mm, data, io::Split::kVal);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& d : report.datasets) {
      if (d.n_samples == 0) continue;
      sum += d.sample_macro_f1;
      ++n;
    }
    if (n == 0) fail(ErrorKind::kData, "no validation windows for early stopping");
    if (log) log->val = report.datasets;
    return sum / static_cast<double>(n);
  };

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t eseed = batch::epoch_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(eseed);
    shuffle_rng.shuffle(order.begin(), order.end());
    EpochLog log;
    log.phase = cfg.phase;
    log.epoch = epoch;
    for (std::size_t b0 = 0, bi = 0; b0 < order.size(); b0 += cfg.batch_size, ++bi) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::vector<const EpochSample*> ptrs;
      std::vector<std::int32_t> labels;
      for (std::size_t i = b0; i < b1; ++i) {
        ptrs.push_back(train[order[i]]);
        labels.push_back(train[order[i]]->label);
      }
      Rng rng = Rng(eseed, 0x5A).fork(bi);
      Matrix x = model::stack(ptrs);
      if (cfg.augment) x = augment_batch(x, t, cfg.augmentation, rng, nullptr);
      auto h = m.encode(tape, x, static_cast<Eigen::Index>(ptrs.size()), true, &rng);
      auto logits = m.classify(tape, h);
      auto loss = nn::ops::cross_entropy(tape, logits, labels);
      log.lr = optim::cosine_lr(cfg.lr, step++, total);
      const StepStats s = optimizer_step(tape, loss, m, opt, log.lr, cfg.grad_clip_norm);
      log.train_loss += s.loss;
      log.max_grad_norm = std::max(log.max_grad_norm, s.norm);
      log.max_clipped_norm = std::max(log.max_clipped_norm, s.clipped);
      ++log.steps;
    }
    log.train_loss /= static_cast<double>(std::max<std::size_t>(log.steps, 1));
    const double score = validation(m, &log);
    log.val_mean_f1 = score;
    if (cfg.swa_enabled && epoch >= cfg.swa_start_epoch()) swa.update(m.params());
    bool stop = false;
    if (score > result.best_val_f1) {
      result.best_val_f1 = score;
      result.best_epoch = epoch;
      best = m.params().clone();
      stale = 0;
    } else {
      ++stale;
      stop = stale >= cfg.patience;
    }
    if (on_epoch) on_epoch(log);
    result.log.push_back(std::move(log));
    if (stop) break;
  }

  if (cfg.swa_enabled && swa.count() > 0) {
    model::Model averaged(m.config(), swa.average());
    const double swa_score = validation(averaged, nullptr);
    if (swa_score >= result.best_val_f1) {
      m.load_values(averaged.params());
      result.best_val_f1 = swa_score;
      result.used_swa = true;
      return result;
    }
  }
  m.load_values(best);
  return result;
}

// --- evaluation ------------------------------------------------------------------

std::vector<metrics::SamplePrediction> predict(const model::Model& m, const SampleList& samples) {
  std::vector<metrics::SamplePrediction> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += kEvalBatch) {
    const std::size_t b1 = std::min(samples.size(), b0 + kEvalBatch);
    idx.resize(b1 - b0);
    std::iota(idx.begin(), idx.end(), b0);
    const Matrix logits = m.logits(model::stack(samples, idx), static_cast<Eigen::Index>(idx.size()));
    const Matrix p = model::softmax_rows(logits);
    const auto pred = model::argmax_rows(logits);
    for (std::size_t i = 0; i < idx.size(); ++i)
      out.push_back({samples[b0 + i].subject_id, pred[i],
                     p.cols() > metrics::kPositiveClass
                         ? p(static_cast<Eigen::Index>(i), metrics::kPositiveClass)
                         : 0.0});
  }
  return out;
}

metrics::DatasetMetrics evaluate_samples(const model::Model& m, const SampleList& samples,
                                         const io::LabelTable& labels, const std::string& dataset_id) {
  metrics::DatasetMetrics out;
  out.dataset_id = dataset_id;
  out.n_samples = samples.size();
  if (samples.empty()) return out;
  for (const auto& s : samples)
    if (s.timesteps() != m.config().seq_len || s.channels() != m.config().n_channels)
      fail(ErrorKind::kShape, "window shape does not match the model");
  const auto preds = predict(m, samples);
  std::vector<std::int32_t> truth, pred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    truth.push_back(samples[i].label);
    pred.push_back(preds[i].predicted);
  }
  out.sample_accuracy = metrics::accuracy(truth, pred);
  out.sample_macro_f1 = metrics::macro_f1(truth, pred);
  const auto votes = metrics::vote_subjects(preds, labels);
  out.n_subjects = votes.subjects.size();
  out.subject_accuracy = votes.accuracy;
  out.subject_macro_f1 = votes.macro_f1;
  out.votes = votes.subjects;
  return out;
}

metrics::MetricsReport evaluate(const model::Model& m, std::span<const FinetuneData> data,
                                io::Split split) {
  metrics::MetricsReport report;
  report.split = std::string(io::to_string(split));
  for (const auto& d : data)
    report.datasets.push_back(evaluate_samples(m, io::select_split(*d.corpus, d.split, split),
                                               d.corpus->labels, d.corpus->manifest.dataset_id));
  return report;
}

metrics::MetricsReport evaluate(const model::Model& m, const io::Corpus& corpus,
                                const io::SplitAssignment& assignment, io::Split split) {
  const FinetuneData d{&corpus, assignment};
  return evaluate(m, std::span<const FinetuneData>(&d, 1), split);
}

model::ParamStore apply_swa(std::span<const model::ParamStore> history) {
  if (history.empty()) fail(ErrorKind::kConfig, "SWA needs at least one snapshot");
  optim::SwaAverager avg;
  for (const auto& h : history) avg.update(h);
  return avg.average();
}

// --- ablations -------------------------------------------------------------------

FrequencyBand parse_band(std::string_view name) {
  for (const auto& b : kEegBands)
    if (b.name == name) return b;
  if (name == kFullBand.name) return kFullBand;
  fail(ErrorKind::kConfig, "unknown band '" + std::string(name) +
                               "' (expected delta, theta, alpha, beta, gamma or all)");
}

const std::vector<ChannelRegion>& channel_regions() {
  static const std::vector<ChannelRegion> regions{
      {"frontopolar", {"Fp1", "Fp2"}},
      {"frontal", {"F7", "F3", "Fz", "F4", "F8"}},
      {"temporal", {"T3", "T4", "T5", "T6"}},
      {"parietal", {"P3", "Pz", "P4"}},
      {"occipital", {"O1", "O2"}},
      {"central", {"C3", "Cz", "C4"}},
  };
  return regions;
}

ChannelRegion parse_region(std::string_view name) {
  if (name == "none") return {"none", {}};
  for (const auto& r : channel_regions())
    if (prep::iequals(r.name, name)) return r;
  fail(ErrorKind::kConfig, "unknown region '" + std::string(name) + "'");
}

SampleList band_filter(const SampleList& samples, const FrequencyBand& band) {
  const bool full = band.lo == kFullBand.lo && band.hi == kFullBand.hi;
  std::optional<prep::Bandpass> filter;
  if (!full) filter.emplace(band.lo, band.hi, kTargetRate);
  SampleList out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Matrix x = s.data.cast<double>();
    if (filter) filter->apply_columns(x);
    prep::normalize_columns(x);
    EpochSample f = s;
    f.data = x.cast<float>();
    out.push_back(std::move(f));
  }
  return out;
}

io::Corpus band_filter(const io::Corpus& corpus, const FrequencyBand& band) {
  io::Corpus out = corpus;
  out.samples = band_filter(corpus.samples, band);
  return out;
}

SampleList region_mask(const SampleList& samples, const ChannelRegion& region) {
  const auto& montage = prep::Montage::standard();
  std::vector<Eigen::Index> cols;
  for (auto name : region.channels) {
    const auto idx = montage.index_of(name);
    if (!idx) fail(ErrorKind::kConfig, "region channel '" + std::string(name) + "' not in montage");
    cols.push_back(static_cast<Eigen::Index>(*idx));
  }
  SampleList out = samples;
  for (auto& s : out) {
    for (Eigen::Index c : cols) {
      if (c >= s.channels()) fail(ErrorKind::kShape, "window has fewer channels than the montage");
      s.data.col(c).setZero();
    }
  }
  return out;
}

metrics::MetricsReport band_ablation(const model::Model& m, const io::Corpus& corpus,
                                     const io::SplitAssignment& assignment, io::Split split,
                                     const FrequencyBand& band) {
  metrics::MetricsReport report;
  report.split = std::string(io::to_string(split));
  const auto samples = band_filter(io::select_split(corpus, assignment, split), band);
  report.datasets.push_back(evaluate_samples(m, samples, corpus.labels, corpus.manifest.dataset_id));
  return report;
}

metrics::MetricsReport region_ablation(const model::Model& m, const io::Corpus& corpus,
                                       const io::SplitAssignment& assignment, io::Split split,
                                       const ChannelRegion& region) {
  metrics::MetricsReport report;
  report.split = std::string(io::to_string(split));
  const auto samples = region_mask(io::select_split(corpus, assignment, split), region);
  report.datasets.push_back(evaluate_samples(m, samples, corpus.labels, corpus.manifest.dataset_id));
  return report;
}

// --- probing ---------------------------------------------------------------------

Matrix embed_samples(const model::Model& m, const SampleList& samples) {
  Matrix out(static_cast<Eigen::Index>(samples.size()), 2 * m.config().d_model);
  std::vector<std::size_t> idx;
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += kEvalBatch) {
    const std::size_t b1 = std::min(samples.size(), b0 + kEvalBatch);
    idx.resize(b1 - b0);
    std::iota(idx.begin(), idx.end(), b0);
    out.middleRows(static_cast<Eigen::Index>(b0), static_cast<Eigen::Index>(idx.size())) =
        m.embed(model::stack(samples, idx), static_cast<Eigen::Index>(idx.size()));
  }
  return out;
}

ProbeResult linear_probe(const Matrix& train_x, std::span<const std::int64_t> train_y,
                         const Matrix& test_x, std::span<const std::int64_t> test_y,
                         const ProbeConfig& cfg) {
  if (train_x.rows() != static_cast<Eigen::Index>(train_y.size()) ||
      test_x.rows() != static_cast<Eigen::Index>(test_y.size()) || train_x.cols() != test_x.cols())
    fail(ErrorKind::kShape, "probe features and labels disagree");
  if (train_x.rows() == 0) fail(ErrorKind::kData, "probe needs training rows");
  std::map<std::int64_t, Eigen::Index> classes;
  for (auto y : train_y) classes.emplace(y, 0);
  Eigen::Index k = 0;
  for (auto& [y, i] : classes) i = k++;

  const Eigen::RowVectorXd mean = train_x.colwise().mean();
  Eigen::RowVectorXd sd = ((train_x.rowwise() - mean).array().square().colwise().mean()).sqrt();
  sd = sd.unaryExpr([](double v) { return v < 1e-12 ? 1.0 : v; });
  auto standardize = [&](const Matrix& x) {
    Matrix s = (x.rowwise() - mean).array().rowwise() / sd.array();
    return s;
  };
  const Matrix xs = standardize(train_x);
  const Matrix xt = standardize(test_x);
  const Eigen::Index n = xs.rows(), d = xs.cols();
  Matrix onehot = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, classes.at(train_y[static_cast<std::size_t>(i)])) = 1.0;

  Matrix w = Matrix::Zero(d, k), mw = w, vw = w;
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(k), mb = b, vb = b;
  for (int it = 1; it <= cfg.iterations; ++it) {
    Matrix logits = xs * w;
    logits.rowwise() += b;
    const Matrix g = (model::softmax_rows(logits) - onehot) / static_cast<double>(n);
    const Matrix gw = xs.transpose() * g + cfg.l2 * w;
    const Eigen::RowVectorXd gb = g.colwise().sum();
    mw = 0.9 * mw + 0.1 * gw;
    vw = 0.999 * vw + 0.001 * gw.cwiseProduct(gw);
    mb = 0.9 * mb + 0.1 * gb;
    vb = 0.999 * vb + 0.001 * gb.cwiseProduct(gb);
    const double c1 = 1.0 - std::pow(0.9, it), c2 = 1.0 - std::pow(0.999, it);
    w.array() -= cfg.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + 1e-8);
    b.array() -= cfg.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + 1e-8);
  }

  auto score = [&](const Matrix& x, std::span<const std::int64_t> y) {
    if (x.rows() == 0) return 0.0;
    Matrix logits = x * w;
    logits.rowwise() += b;
    const auto pred = model::argmax_rows(logits);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto it = classes.find(y[i]);
      hit += it != classes.end() && it->second == pred[i];
    }
    return static_cast<double>(hit) / static_cast<double>(y.size());
  };
  ProbeResult r;
  r.n_classes = static_cast<std::size_t>(k);
  r.train_accuracy = score(xs, train_y);
  r.test_accuracy = score(xt, test_y);
  r.chance = 1.0 / static_cast<double>(k);
  return r;
}

}  // namespace lead::train
