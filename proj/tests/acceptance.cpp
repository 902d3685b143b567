// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [criterion numbers...]   (default: all)
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include "lead/batching.hpp"
#include "lead/metrics.hpp"
#include "lead/objective.hpp"
#include "lead/signal_prep.hpp"
#include "lead/spectral.hpp"
#include "lead/synth.hpp"
#include "lead/train_eval.hpp"
#include "oracles.hpp"

namespace {

using namespace lead;
namespace lt = lead::testing;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- 1-3: objective --------------------------------------------------------------

Outcome objective_oracles() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto b = lt::random_batch(rng, 6, 8);
    worst = std::max({worst, std::abs(obj::sample_loss(b) - lt::brute_sample_loss(b)),
                      std::abs(obj::subject_loss(b) - lt::brute_subject_loss(b)),
                      std::abs(obj::joint_loss(b) - lt::brute_joint_loss(b))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, fmt("500 batches, max |vectorized - loop| = %.2e, %.2f s", worst, secs)};
}

Outcome reduction_law() {
  Rng rng(102);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto b = lt::random_batch(rng, 6, 8);
    std::iota(b.subject_ids.begin(), b.subject_ids.end(), std::int64_t{1000});
    worst = std::max(worst, std::abs(obj::subject_loss(b) - obj::sample_loss(b)));
  }
  return {worst <= 1e-6, fmt("200 distinct-id batches, max |subject - sample| = %.2e", worst)};
}

Outcome closed_forms() {
  obj::ContrastBatch one;
  one.za = Matrix::Constant(1, 4, 0.7);
  one.zb = Matrix::Constant(1, 4, -1.3);
  one.subject_ids = {3};
  const double b1 = obj::sample_loss(one);

  obj::ContrastBatch ortho;
  ortho.za = Matrix::Identity(2, 2);
  ortho.zb = Matrix::Identity(2, 2);
  ortho.subject_ids = {1, 2};
  ortho.tau = 1.0;
  const double e_ortho = std::abs(obj::sample_loss(ortho) - std::log1p(std::exp(-1.0)));

  obj::ContrastBatch collapsed;
  collapsed.za = Matrix::Constant(2, 3, 1.0);
  collapsed.zb = Matrix::Constant(2, 3, 1.0);
  collapsed.subject_ids = {9, 9};
  const double e_ln2 = std::abs(obj::subject_loss(collapsed) - std::log(2.0));
  return {b1 == 0.0 && e_ortho <= 1e-9 && e_ln2 <= 1e-9,
          fmt("B=1 loss %.1e, |ortho - ln(1+e^-1)| %.1e, |collapsed - ln 2| %.1e", b1, e_ortho, e_ln2)};
}

// --- 4: gradient check -------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = lt::check_model_gradients(seed, 4);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = r.worst_param;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 60.0,
          fmt("10 seeds, max relative error %.2e (%s), %.1f s", worst, where.c_str(), secs)};
}

// --- 5: shuffler -------------------------------------------------------------------

Outcome shuffler() {
  Rng rng(105);
  int bad_perm = 0, bad_cohesion = 0, bad_det = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(600);
    const std::size_t group = 1 + rng.below(4);
    const std::size_t bs = group * (1 + rng.below(64));
    std::vector<std::int64_t> ids(n);
    const std::uint64_t n_subj = 1 + rng.below(50);
    for (auto& id : ids) id = static_cast<std::int64_t>(rng.below(n_subj));
    const std::uint64_t seed = rng.next_u64();
    const auto plan = batch::shuffle_indices(ids, bs, group, seed);

    std::vector<std::size_t> sorted = plan.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i)
      if (sorted[i] != i) {
        ++bad_perm;
        break;
      }

    std::vector<std::size_t> ref(n);
    std::iota(ref.begin(), ref.end(), std::size_t{0});
    std::stable_sort(ref.begin(), ref.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
    std::vector<std::size_t> batch_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) batch_of[plan.order[pos]] = pos / bs;
    for (std::size_t g = 0; g + group <= n; g += group)
      for (std::size_t k = 1; k < group; ++k)
        if (batch_of[ref[g + k]] != batch_of[ref[g]]) ++bad_cohesion;

    if (batch::shuffle_indices(ids, bs, group, seed).order != plan.order) ++bad_det;
  }
  return {bad_perm == 0 && bad_cohesion == 0 && bad_det == 0,
          fmt("1000 random inputs: %d non-permutations, %d split groups, %d nondeterministic", bad_perm,
              bad_cohesion, bad_det)};
}

// --- 6: preprocessing --------------------------------------------------------------

Outcome preprocessing() {
  std::vector<std::string> problems;
  std::size_t checked = 0;
  for (std::size_t win = 1; win <= 512; ++win)
    for (std::size_t stride = 1; stride <= win; ++stride) {
      std::size_t count = 0;
      for (std::size_t t = 0; t <= 512; ++t) {
        // Brute force: one more window each time a start s = k*stride fits.
        if (t >= win && (t - win) % stride == 0) ++count;
        ++checked;
        if (prep::segment_count(t, win, stride) != count) {
          problems.push_back(fmt("count(%zu,%zu,%zu)", t, win, stride));
          break;
        }
      }
    }

  io::SynthSpec spec;
  spec.n_subjects = 4;
  spec.trial_seconds = 8.0;
  const auto raw = io::synth_raw(spec, 128.0, prep::Montage::canonical_names());
  prep::PreprocessConfig cfg;
  cfg.stride = 64;
  const auto windows = prep::preprocess_trial(raw.front().trial, cfg);
  const std::size_t per_trial = prep::segment_count(1024, 128, 64);
  if (windows.size() != 15 || per_trial != 15 || per_trial * 2 * 92 != 2760)
    problems.push_back(fmt("8 s trial at stride 64: %zu windows", windows.size()));

  double worst_mean = 0.0, worst_std = 0.0;
  for (const auto& w : windows)
    for (Eigen::Index c = 0; c < w.channels(); ++c) {
      const Eigen::VectorXd col = w.data.col(c).cast<double>();
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().mean());
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_std = std::max(worst_std, std::abs(sd - 1.0));
    }
  if (worst_mean >= 1e-5 || worst_std >= 1e-4) problems.push_back("normalization");

  const prep::Bandpass bp(0.5, 45.0, 128.0);
  auto sine = [](double f, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / 128.0);
    return x;
  };
  const auto x10 = sine(10.0, 128 * 30);
  const auto y10 = bp.apply(x10);
  auto interior = [](const std::vector<double>& v) { return std::span<const double>(v).subspan(256, v.size() - 512); };
  const double pass_db = 20.0 * std::log10(spectral::rms(interior(y10)) / spectral::rms(interior(x10)));
  const auto x01 = sine(0.1, 128 * 100);
  const double stop_db = 20.0 * std::log10(spectral::rms(bp.apply(x01)) / spectral::rms(x01));
  if (!(std::abs(pass_db) < 1.0) || !(stop_db <= -20.0)) problems.push_back("bandpass");

  prep::RawTrial pair;
  pair.fs = 128.0;
  pair.channel_names = {"C3", "C4"};
  for (const auto& n : pair.channel_names) pair.coords.push_back(*prep::standard_coordinates().find(n));
  Rng rng(106);
  pair.data = lt::random_matrix(rng, 256, 2);
  const auto aligned = prep::align_channels(pair);
  const auto cz = static_cast<Eigen::Index>(*prep::Montage::standard().index_of("Cz"));
  bool exact = true;
  for (Eigen::Index r = 0; r < pair.timesteps(); ++r)
    exact &= aligned.data(r, cz) == 0.5 * (pair.data(r, 0) + pair.data(r, 1));
  if (!exact) problems.push_back("equidistant interpolation");

  std::string detail = fmt(
      "%zu (T, win, stride) counts; %zu windows per 8 s trial, 92x2 trials -> %zu; 10 Hz %+.3f dB, "
      "0.1 Hz %.1f dB; max |mean| %.1e, max |std-1| %.1e; C3/C4 -> Cz exact: %s",
      checked, windows.size(), per_trial * 2 * 92, pass_db, stop_db, worst_mean, worst_std, exact ? "yes" : "no");
  for (const auto& p : problems) detail += "; failed: " + p;
  return {problems.empty(), detail};
}

// --- 7: voting ----------------------------------------------------------------------

Outcome voting() {
  Rng rng(107);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    io::LabelTable labels;
    const int n_subjects = 1 + static_cast<int>(rng.below(10));
    for (int s = 1; s <= n_subjects; ++s) labels.rows.push_back({(s - 1) % 2, s});
    std::vector<metrics::SamplePrediction> preds;
    for (int s = 1; s <= n_subjects; ++s) {
      const auto n = 1 + rng.below(8);
      for (std::uint64_t i = 0; i < n; ++i)
        preds.push_back({s, static_cast<std::int32_t>(rng.below(2)), static_cast<double>(rng.below(5)) / 4.0});
    }
    const auto oracle = lt::tally_oracle(preds);
    for (const auto& v : metrics::vote_subjects(preds, labels).subjects)
      if (v.label != oracle.at(v.subject_id).label || v.tally != oracle.at(v.subject_id).tally) ++mismatches;
  }

  io::LabelTable one;
  one.rows.push_back({1, 1});
  auto windows = [](int ad, int hc, double p) {
    std::vector<metrics::SamplePrediction> v;
    for (int i = 0; i < ad; ++i) v.push_back({1, 1, p});
    for (int i = 0; i < hc; ++i) v.push_back({1, 0, p});
    return v;
  };
  const auto majority = metrics::vote_subjects(windows(51, 49, 0.2), one).subjects.front().label;
  const auto tie_hi = metrics::vote_subjects(windows(50, 50, 0.6), one).subjects.front().label;
  const auto tie_lo = metrics::vote_subjects(windows(50, 50, 0.4), one).subjects.front().label;
  const auto tie_eq = metrics::vote_subjects(windows(50, 50, 0.5), one).subjects.front().label;
  auto reversed = windows(50, 50, 0.6);
  std::reverse(reversed.begin(), reversed.end());
  const auto tie_rev = metrics::vote_subjects(reversed, one).subjects.front().label;
  const bool ok = mismatches == 0 && majority == 1 && tie_hi == 1 && tie_lo == 0 && tie_eq == 1 && tie_rev == tie_hi;
  return {ok, fmt("1000 tables, %d mismatches; 51/100 AD -> %s; 50/50 ties p=0.6/0.4/0.5 -> %d/%d/%d, order-invariant: %s",
                  mismatches, majority == 1 ? "AD" : "HC", tie_hi, tie_lo, tie_eq, tie_rev == tie_hi ? "yes" : "no")};
}

// --- 8-11: synthetic experiment ----------------------------------------------------

model::ModelConfig desk_model() {
  model::ModelConfig c;
  c.d_model = 32;
  c.layers = 2;
  c.heads = 4;
  c.d_ff = 64;
  c.patch_len = 8;
  c.target_channels = 32;
  return c;
}

io::SynthSpec desk_synth(std::uint64_t seed) {
  io::SynthSpec s;
  s.n_subjects = 60;
  s.trial_seconds = 60.0;
  s.class_band_power = {{1, 1, 1, 1, 1}, {1, 2, 1, 1, 1}};
  s.subject_nuisance_strength = 0.5;
  s.seed = seed;
  return s;
}

train::TrainConfig desk_pretrain(std::uint64_t seed) {
  auto c = train::TrainConfig::pretrain_defaults();
  c.epochs = 5;
  c.batch_size = 256;
  c.lr = 1e-3;
  c.patience = 0;
  c.seed = seed;
  return c;
}

train::TrainConfig desk_finetune(std::uint64_t seed, int epochs) {
  auto c = train::TrainConfig::finetune_defaults();
  c.epochs = epochs;
  c.batch_size = 128;
  c.lr = 1e-3;
  c.patience = std::min(10, epochs);
  c.seed = seed;
  return c;
}

/// Train and validation windows only; labels are not used by pre-training.
io::Corpus pretraining_view(const io::Corpus& c, const io::SplitAssignment& split) {
  io::Corpus out = c;
  out.samples = io::select_split(c, split, io::Split::kTrain);
  const auto val = io::select_split(c, split, io::Split::kVal);
  out.samples.insert(out.samples.end(), val.begin(), val.end());
  return out;
}

struct PipelineRun {
  io::Corpus corpus;
  io::SplitAssignment split;
  std::optional<model::Model> pretrained;
  std::optional<model::Model> finetuned;
  metrics::MetricsReport report;
  std::string report_json;
  int finetune_epochs = 0;
  double seconds = 0.0;
};

PipelineRun run_pipeline(std::uint64_t seed) {
  const auto t0 = Clock::now();
  PipelineRun run;
  run.corpus = io::synth_generate(desk_synth(seed));
  run.split = io::split_subjects(run.corpus.labels, {0.6, 0.2, 0.2}, seed, run.corpus.manifest.dataset_id);
  const io::Corpus pre_corpus = pretraining_view(run.corpus, run.split);
  const io::Corpus* corpora[] = {&pre_corpus};
  auto pre = train::pretrain(model::Model(desk_model(), seed), corpora, desk_pretrain(seed));
  run.pretrained.emplace(pre.model);
  const train::FinetuneData data[] = {{&run.corpus, run.split}};
  auto fine = train::finetune(pre.model, data, desk_finetune(seed, 30));
  run.finetune_epochs = static_cast<int>(fine.log.size());
  run.finetuned.emplace(std::move(fine.model));
  run.report = train::evaluate(*run.finetuned, run.corpus, run.split, io::Split::kTest);
  run.report_json = metrics::to_json(run.report);
  run.seconds = seconds_since(t0);
  return run;
}

PipelineRun& pipeline() {
  static PipelineRun run = run_pipeline(41);
  return run;
}

Outcome end_to_end() {
  const auto& run = pipeline();
  const auto& d = run.report.datasets.front();
  const bool ok = d.subject_accuracy >= 0.90 && d.sample_macro_f1 >= 0.75 && run.seconds <= 900.0;
  return {ok, fmt("%zu windows, %zu test subjects: subject accuracy %.3f, sample macro-F1 %.4f; %d fine-tuning epochs; "
                  "%.0f s on this machine",
                  run.corpus.samples.size(), d.n_subjects, d.subject_accuracy, d.sample_macro_f1, run.finetune_epochs,
                  run.seconds)};
}

Outcome subject_probe() {
  const auto& run = pipeline();
  const io::Corpus view = pretraining_view(run.corpus, run.split);
  auto cfg = desk_pretrain(41);
  cfg.epochs = 40;
  cfg.batch_size = 64;
  cfg.lr = 3e-3;
  const io::Corpus* corpora[] = {&view};
  const auto pre = train::pretrain(model::Model(desk_model(), 41), corpora, cfg);
  const Matrix h = train::embed_samples(pre.model, view.samples);
  std::map<std::int32_t, int> seen;
  std::vector<Eigen::Index> tr, te;
  std::vector<std::int64_t> ytr, yte;
  for (std::size_t i = 0; i < view.samples.size(); ++i) {
    const auto sid = view.samples[i].subject_id;
    const bool even = seen[sid]++ % 2 == 0;
    (even ? tr : te).push_back(static_cast<Eigen::Index>(i));
    (even ? ytr : yte).push_back(sid);
  }
  const Matrix xtr = h(tr, Eigen::all);
  const Matrix xte = h(te, Eigen::all);
  const auto r = train::linear_probe(xtr, ytr, xte, yte);
  return {r.test_accuracy >= 5.0 * r.chance,
          fmt("%zu subjects, 40-epoch encoder, held-out window accuracy %.3f vs chance %.4f (%.1fx)", r.n_classes, r.test_accuracy,
              r.chance, r.test_accuracy / r.chance)};
}

Outcome ablation_direction() {
  const auto& run = pipeline();
  const auto& m = *run.finetuned;
  const auto theta = train::band_ablation(m, run.corpus, run.split, io::Split::kTest, train::parse_band("theta"));
  const auto gamma = train::band_ablation(m, run.corpus, run.split, io::Split::kTest, train::parse_band("gamma"));
  const double f_theta = theta.mean_sample_f1(), f_gamma = gamma.mean_sample_f1();

  // Second corpus whose class signal lives on the frontal channels only.
  auto spec = desk_synth(41);
  spec.dataset_id = "SYNTH-FRONTAL";
  const auto frontal = train::parse_region("frontal");
  for (auto ch : frontal.channels) spec.signal_channels.emplace_back(ch);
  const io::Corpus corpus = io::synth_generate(spec);
  const auto split = io::split_subjects(corpus.labels, {0.6, 0.2, 0.2}, 41, spec.dataset_id);
  const train::FinetuneData data[] = {{&corpus, split}};
  const auto tuned = train::finetune(*run.pretrained, data, desk_finetune(41, 10)).model;
  const double base = train::evaluate(tuned, corpus, split, io::Split::kTest).mean_subject_f1();
  const double masked_f =
      train::region_ablation(tuned, corpus, split, io::Split::kTest, frontal).mean_subject_f1();
  const double masked_o =
      train::region_ablation(tuned, corpus, split, io::Split::kTest, train::parse_region("occipital"))
          .mean_subject_f1();
  const double gap = (base - masked_f) - (base - masked_o);
  return {f_theta > f_gamma && gap >= 0.1,
          fmt("band: theta sample F1 %.4f vs gamma %.4f; region: subject F1 %.3f, frontal masked %.3f, "
              "occipital masked %.3f, extra degradation %.3f",
              f_theta, f_gamma, base, masked_f, masked_o, gap)};
}

Outcome reproducibility() {
  const auto& first = pipeline();
  const auto second = run_pipeline(41);
  const bool same = first.report_json == second.report_json;
  return {same, fmt("rerun with seed 41: reports %s (%zu bytes)", same ? "identical" : "DIFFER", first.report_json.size())};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "objective matches loop oracles", objective_oracles},
      {2, "subject loss reduces to sample loss", reduction_law},
      {3, "closed-form loss values", closed_forms},
      {4, "encoder gradient check", gradient_check},
      {5, "grouped shuffler guarantees", shuffler},
      {6, "preprocessing arithmetic and filters", preprocessing},
      {7, "subject-level voting", voting},
      {8, "synthetic end-to-end run", end_to_end},
      {9, "pre-trained embeddings encode subject identity", subject_probe},
      {10, "band and region ablation direction", ablation_direction},
      {11, "pipeline reproducibility", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
