// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "lead/optim.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

using lead::Matrix;
using lead::Rng;
namespace optim = lead::optim;
namespace model = lead::model;
namespace lt = lead::testing;

model::ParamStore store_with(Rng& rng, std::initializer_list<std::pair<int, int>> shapes) {
  model::ParamStore s;
  int k = 0;
  for (auto [r, c] : shapes) s.add("p" + std::to_string(k++), lt::random_matrix(rng, r, c));
  return s;
}

void random_grads(Rng& rng, model::ParamStore& s, double scale) {
  for (auto& p : s.all()) p.var->grad = lt::random_matrix(rng, p.var->value.rows(), p.var->value.cols(), scale);
}

TEST(CosineLr, EndpointsAndMonotone) {
  for (std::size_t total : {1u, 2u, 7u, 500u}) {
    EXPECT_DOUBLE_EQ(optim::cosine_lr(1e-3, 0, total), 1e-3);
    EXPECT_LE(optim::cosine_lr(1e-3, total - 1, total), 1e-3 * 1e-8 + (total == 1 ? 1e-3 : 0.0));
    for (std::size_t s = 1; s < total; ++s)
      EXPECT_LE(optim::cosine_lr(1e-3, s, total), optim::cosine_lr(1e-3, s - 1, total));
  }
  EXPECT_NEAR(optim::cosine_lr(2.0, 50, 101), 1.0, 1e-12);
}

TEST(Clip, NormNeverExceedsLimit) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = store_with(rng, {{3, 4}, {1, 5}, {2, 2}});
    random_grads(rng, s, rng.uniform(0.01, 10.0));
    const double max_norm = rng.uniform(0.1, 3.0);
    const double before = optim::global_grad_norm(s);
    EXPECT_DOUBLE_EQ(optim::clip_grad_norm(s, max_norm), before);
    const double after = optim::global_grad_norm(s);
    EXPECT_LE(after, max_norm + 1e-6);
    if (before <= max_norm) EXPECT_NEAR(after, before, 1e-12);
  }
}

TEST(Clip, GlobalNormMatchesLoop) {
  Rng rng(2);
  auto s = store_with(rng, {{3, 4}, {2, 2}});
  random_grads(rng, s, 1.0);
  double sq = 0.0;
  for (const auto& p : s.all())
    for (Eigen::Index i = 0; i < p.var->grad.size(); ++i) sq += p.var->grad.data()[i] * p.var->grad.data()[i];
  EXPECT_NEAR(optim::global_grad_norm(s), std::sqrt(sq), 1e-12);
}

TEST(AdamW, ZeroLearningRateLeavesParametersUnchanged) {
  Rng rng(3);
  auto s = store_with(rng, {{4, 4}, {1, 4}});
  const auto before = s.clone();
  optim::AdamW opt(s);
  for (int step = 0; step < 5; ++step) {
    random_grads(rng, s, 1.0);
    opt.step(0.0);
  }
  for (std::size_t i = 0; i < s.all().size(); ++i)
    EXPECT_TRUE(s.all()[i].var->value == before.all()[i].var->value);
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(AdamW, FirstStepMovesBySignTimesLr) {
  model::ParamStore s;
  Matrix v(1, 3);
  v << 1.0, -2.0, 0.5;
  s.add("w", v);
  s.all()[0].var->grad = Matrix(1, 3);
  s.all()[0].var->grad << 0.3, -4.0, 1e-3;
  optim::AdamW opt(s, {0.9, 0.999, 1e-8, 0.0});
  opt.step(0.01);
  const Matrix& w = s.all()[0].var->value;
  EXPECT_NEAR(w(0, 0), 1.0 - 0.01, 1e-8);
  EXPECT_NEAR(w(0, 1), -2.0 + 0.01, 1e-8);
  EXPECT_NEAR(w(0, 2), 0.5 - 0.01, 1e-5);
}

TEST(AdamW, DecayIsDecoupled) {
  model::ParamStore s;
  s.add("w", Matrix::Constant(2, 2, 3.0));
  s.all()[0].var->grad = Matrix::Zero(2, 2);
  optim::AdamW opt(s, {0.9, 0.999, 1e-8, 0.1});
  opt.step(0.5);
  EXPECT_NEAR(s.all()[0].var->value(0, 0), 3.0 * (1.0 - 0.5 * 0.1), 1e-12);
}

TEST(AdamW, FrozenParametersAreNotUpdated) {
  model::ParamStore s;
  s.add("frozen", Matrix::Ones(2, 2), false);
  s.add("w", Matrix::Ones(2, 2));
  for (auto& p : s.all()) p.var->grad = Matrix::Ones(2, 2);
  optim::AdamW opt(s);
  opt.step(0.1);
  EXPECT_TRUE(s.all()[0].var->value == Matrix::Ones(2, 2));
  EXPECT_FALSE(s.all()[1].var->value == Matrix::Ones(2, 2));
}

TEST(Swa, SingleSnapshotIsIdentity) {
  Rng rng(4);
  auto s = store_with(rng, {{2, 3}});
  optim::SwaAverager swa;
  swa.update(s);
  EXPECT_EQ(swa.count(), 1u);
  EXPECT_TRUE(swa.average().all()[0].var->value == s.all()[0].var->value);
}

TEST(Swa, OppositeSnapshotsCancel) {
  Rng rng(5);
  auto s = store_with(rng, {{2, 3}, {1, 3}});
  auto neg = s.clone();
  for (auto& p : neg.all()) p.var->value = -p.var->value;
  optim::SwaAverager swa;
  swa.update(s);
  swa.update(neg);
  const auto avg = swa.average();
  for (const auto& p : avg.all()) EXPECT_TRUE(p.var->value.isZero(1e-15));
}

TEST(Swa, AverageOfThreeMatchesMean) {
  Rng rng(6);
  std::vector<model::ParamStore> snaps;
  optim::SwaAverager swa;
  for (int k = 0; k < 3; ++k) {
    snaps.push_back(store_with(rng, {{3, 3}}));
    swa.update(snaps.back());
  }
  const Matrix mean = (snaps[0].all()[0].var->value + snaps[1].all()[0].var->value +
                       snaps[2].all()[0].var->value) / 3.0;
  EXPECT_TRUE(swa.average().all()[0].var->value.isApprox(mean, 1e-14));
  EXPECT_EQ(swa.count(), 3u);
}

}  // namespace
