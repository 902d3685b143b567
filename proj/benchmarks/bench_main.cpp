// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <benchmark/benchmark.h>

#include "lead/filter.hpp"
#include "lead/model.hpp"
#include "lead/objective.hpp"
#include "lead/signal_prep.hpp"

namespace {

using namespace lead;

Matrix noise(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

model::ModelConfig bench_model(int d_model) {
  model::ModelConfig c;
  c.d_model = d_model;
  c.heads = 4;
  c.d_ff = 2 * d_model;
  c.layers = 2;
  c.target_channels = d_model;
  return c;
}

// Eval-mode forward pass; range(0) = batch, range(1) = d_model.
void BM_Encode(benchmark::State& state) {
  const auto batch = state.range(0);
  const model::Model m(bench_model(static_cast<int>(state.range(1))), 1);
  Rng rng(2);
  const Matrix x = noise(rng, batch * m.config().seq_len, m.config().n_channels);
  for (auto _ : state) benchmark::DoNotOptimize(m.embed(x, batch));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Encode)->Args({32, 32})->Args({128, 32})->Args({32, 128})->Unit(benchmark::kMillisecond);

// One contrastive training step (forward, projection, joint loss, backward).
void BM_ContrastiveStep(benchmark::State& state) {
  const auto batch = state.range(0);
  const model::Model m(bench_model(32), 1);
  Rng rng(3);
  const Matrix x = noise(rng, 2 * batch * m.config().seq_len, m.config().n_channels);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(batch));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i / 4);
  for (auto _ : state) {
    nn::Tape tape;
    const auto z = m.project(tape, m.encode(tape, x, 2 * batch, true, &rng));
    const auto loss = obj::joint_loss_op(tape, z, ids, 0.1, 0.5, 0.5);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss->value(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ContrastiveStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_JointLossGrad(benchmark::State& state) {
  const auto b = state.range(0);
  Rng rng(4);
  obj::ContrastBatch batch;
  batch.za = noise(rng, b, 128);
  batch.zb = noise(rng, b, 128);
  for (Eigen::Index i = 0; i < b; ++i) batch.subject_ids.push_back(i / 8);
  for (auto _ : state) benchmark::DoNotOptimize(obj::joint_loss_grad(batch).loss);
}
BENCHMARK(BM_JointLossGrad)->Arg(64)->Arg(256)->Arg(1024);

// 60 s of 19-channel signal at 128 Hz.
void BM_Bandpass(benchmark::State& state) {
  const prep::Bandpass bp(0.5, 45.0, 128.0);
  Rng rng(5);
  const Matrix signal = noise(rng, 60 * 128, 19);
  for (auto _ : state) {
    Matrix data = signal;
    bp.apply_columns(data);
    benchmark::DoNotOptimize(data.data());
  }
}
BENCHMARK(BM_Bandpass)->Unit(benchmark::kMillisecond);

// 60 s of 19-channel signal from range(0) Hz to 128 Hz.
void BM_Resample(benchmark::State& state) {
  prep::RawTrial trial;
  trial.fs = static_cast<double>(state.range(0));
  Rng rng(6);
  trial.data = noise(rng, 60 * state.range(0), 19);
  for (int c = 0; c < 19; ++c) trial.channel_names.push_back("ch" + std::to_string(c));
  for (auto _ : state) benchmark::DoNotOptimize(prep::resample(trial, 128.0).data.data());
}
BENCHMARK(BM_Resample)->Arg(250)->Arg(256)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
