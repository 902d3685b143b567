// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "lead/autodiff.hpp"
#include "lead/model.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

using lead::ErrorKind;
using lead::Matrix;
using lead::Rng;
namespace nn = lead::nn;
namespace ops = lead::nn::ops;
namespace model = lead::model;
namespace lt = lead::testing;

/// sum(x .* r) as a 1x1 node, giving every op a scalar head.
nn::Var weighted_sum(nn::Tape& t, const nn::Var& x, const Matrix& r) {
  Matrix v(1, 1);
  v(0, 0) = (x->value.array() * r.array()).sum();
  nn::Var xp = x;
  return t.record(std::move(v), {&x}, [xp, r](nn::Node& out) { xp->accumulate(out.grad(0, 0) * r); });
}

using OpFn = std::function<nn::Var(nn::Tape&, const std::vector<nn::Var>&)>;

/// Largest relative error between taped and central-difference gradients
/// over all inputs of `op`.
double op_gradient_error(const OpFn& op, std::vector<Matrix> inputs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::Var> vars;
  for (auto& m : inputs) vars.push_back(nn::parameter(m));
  nn::Tape tape;
  auto out = op(tape, vars);
  const Matrix r = lt::random_matrix(rng, out->value.rows(), out->value.cols());
  tape.backward(weighted_sum(tape, out, r));
  auto eval = [&]() {
    nn::Tape t;
    return weighted_sum(t, op(t, vars), r)->value(0, 0);
  };
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& v : vars) {
    const Matrix analytic = v->grad_or_zero();
    Matrix numeric(analytic.rows(), analytic.cols());
    for (Eigen::Index i = 0; i < numeric.rows(); ++i)
      for (Eigen::Index j = 0; j < numeric.cols(); ++j) {
        const double keep = v->value(i, j);
        v->value(i, j) = keep + h;
        const double up = eval();
        v->value(i, j) = keep - h;
        const double down = eval();
        v->value(i, j) = keep;
        numeric(i, j) = (up - down) / (2 * h);
      }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-6});
    worst = std::max(worst, (analytic - numeric).norm() / scale);
  }
  return worst;
}

TEST(Ops, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  auto m = [&](Eigen::Index r, Eigen::Index c) { return lt::random_matrix(rng, r, c); };
  const Matrix table = m(3, 4);
  const std::vector<std::int32_t> labels{0, 2, 1, 2, 0};
  struct Case {
    const char* name;
    OpFn fn;
    std::vector<Matrix> inputs;
  };
  const std::vector<Case> cases{
      {"linear", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::linear(t, v[0], v[1], v[2]); },
       {m(5, 3), m(3, 4), m(1, 4)}},
      {"linear_nt", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::linear_nt(t, v[0], v[1], v[2]); },
       {m(5, 3), m(4, 3), m(1, 4)}},
      {"add", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::add(t, v[0], v[1]); }, {m(3, 2), m(3, 2)}},
      {"add_tiled", [table](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::add_tiled(t, v[0], table); },
       {m(6, 4)}},
      {"layer_norm",
       [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::layer_norm(t, v[0], v[1], v[2]); },
       {m(4, 6), m(1, 6), m(1, 6)}},
      {"gelu", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::gelu(t, v[0]); }, {m(4, 5)}},
      {"attention",
       [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::attention(t, v[0], v[1], v[2], 2, 3, 2); },
       {m(6, 4), m(6, 4), m(6, 4)}},
      {"batched_transpose",
       [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::batched_transpose(t, v[0], 2); }, {m(6, 4)}},
      {"patchify", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::patchify(t, v[0], 2, 3); },
       {m(10, 3)}},
      {"last_rows", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::last_rows(t, v[0], 3); },
       {m(6, 4)}},
      {"concat_cols", [](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::concat_cols(t, v[0], v[1]); },
       {m(3, 2), m(3, 4)}},
      {"cross_entropy",
       [labels](nn::Tape& t, const std::vector<nn::Var>& v) { return ops::cross_entropy(t, v[0], labels); },
       {m(5, 3)}},
  };
  for (const auto& c : cases) EXPECT_LT(op_gradient_error(c.fn, c.inputs, 2), 1e-6) << c.name;
}

TEST(Ops, GeluIsExactErfForm) {
  EXPECT_DOUBLE_EQ(nn::gelu_value(0.0), 0.0);
  EXPECT_NEAR(nn::gelu_value(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(nn::gelu_value(-1.0), -0.15865525393145707, 1e-15);
}

TEST(Ops, PatchifyPadsOnlyAtTheTail) {
  Rng rng(3);
  const Matrix x130 = lt::random_matrix(rng, 130, 2);
  nn::Tape t;
  const auto full = ops::patchify(t, t.constant(x130), 1, 8);
  EXPECT_EQ(full->value.rows(), 17);
  EXPECT_EQ(full->value.cols(), 16);
  const auto head = ops::patchify(t, t.constant(x130.topRows(128)), 1, 8);
  EXPECT_TRUE(full->value.topRows(16) == head->value);
  // Last patch: two real rows then zeros.
  EXPECT_TRUE(full->value.row(16).tail(12).isZero(0.0));
  EXPECT_EQ(full->value(16, 0), x130(128, 0));
}

TEST(Ops, DropoutKeepsExpectation) {
  Rng rng(4);
  nn::Tape t;
  const Matrix ones = Matrix::Ones(200, 200);
  const auto y = ops::dropout(t, t.constant(ones), 0.1, rng);
  EXPECT_NEAR(y->value.mean(), 1.0, 0.01);
  EXPECT_TRUE(((y->value.array() == 0.0) || (y->value.array() - 1.0 / 0.9).abs() < 1e-12).all());
}

TEST(ModelConfig, DefaultsAndValidation) {
  model::ModelConfig c;
  EXPECT_EQ(c.head_dim(), 16);
  EXPECT_EQ(c.n_patches(), 16);
  c.seq_len = 130;
  EXPECT_EQ(c.n_patches(), 17);
  model::ModelConfig bad;
  bad.heads = 3;
  EXPECT_LEAD_ERROR(bad.validate(), ErrorKind::kConfig);
  bad = {};
  bad.target_channels = 10;
  EXPECT_LEAD_ERROR(bad.validate(), ErrorKind::kConfig);
  bad = {};
  bad.lambda1 = 0.9;
  EXPECT_LEAD_ERROR(bad.validate(), ErrorKind::kConfig);
  EXPECT_LEAD_ERROR(model::Model(bad, 1), ErrorKind::kConfig);
}

TEST(ModelInit, SameSeedIsBitIdentical) {
  const auto c = lt::tiny_config();
  model::Model a(c, 5), b(c, 5), other(c, 6);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params().all().size(); ++i) {
    EXPECT_TRUE(a.params().all()[i].var->value == b.params().all()[i].var->value);
    any_diff |= a.params().all()[i].var->value != other.params().all()[i].var->value;
  }
  EXPECT_TRUE(any_diff);
}

TEST(ModelInit, LayoutAndParameterCount) {
  model::ModelConfig c;
  model::Model m(c, 1);
  const auto layout = model::param_layout(c);
  ASSERT_EQ(layout.size(), m.params().all().size());
  std::size_t total = 0;
  for (const auto& s : layout) {
    const auto& v = m.params().get(s.name)->value;
    EXPECT_EQ(v.rows(), s.rows) << s.name;
    EXPECT_EQ(v.cols(), s.cols) << s.name;
    if (s.trainable) total += static_cast<std::size_t>(s.rows * s.cols);
  }
  EXPECT_EQ(m.params().get("temporal.patch.weight")->value.rows(), 8 * 19);
  EXPECT_EQ(m.params().get("spatial.w1.weight")->value.rows(), 128);
  EXPECT_EQ(m.params().get("spatial.w1.weight")->value.cols(), 19);
  EXPECT_EQ(m.params().get("spatial.w2.weight")->value.rows(), 128);
  // Same order of magnitude as the reference base model.
  EXPECT_GT(total, 1'000'000u);
  EXPECT_LT(total, 5'000'000u);
  std::printf("default model trainable parameters: %zu\n", total);
}

TEST(ModelInit, PositionTablesAreSinusoidal) {
  model::ModelConfig c = lt::tiny_config();
  model::Model m(c, 1);
  const Matrix pe = model::sinusoid_table(c.n_patches(), c.d_model);
  EXPECT_TRUE(m.params().get("temporal.pos")->value == pe);
  EXPECT_FALSE(m.params().find("temporal.pos")->trainable);
  EXPECT_NEAR(pe(3, 0), std::sin(3.0), 1e-15);
  EXPECT_NEAR(pe(3, 1), std::cos(3.0), 1e-15);
  EXPECT_NEAR(pe(3, 2), std::sin(3.0 / std::pow(10000.0, 2.0 / c.d_model)), 1e-15);
}

TEST(Encode, ShapesForDefaultConfig) {
  model::ModelConfig c;
  c.layers = 1;
  model::Model m(c, 2);
  Rng rng(3);
  const Matrix x = lt::random_matrix(rng, 2 * 128, 19);
  nn::Tape t;
  const auto h = m.encode(t, x, 2, false);
  EXPECT_EQ(h->value.rows(), 2);
  EXPECT_EQ(h->value.cols(), 256);
  EXPECT_EQ(m.project(t, h)->value.cols(), 128);
  EXPECT_EQ(m.classify(t, h)->value.cols(), 2);
}

TEST(Encode, ShapesOverRandomConfigs) {
  Rng rng(4);
  for (int trial = 0; trial < 15; ++trial) {
    model::ModelConfig c;
    c.heads = 1 + static_cast<int>(rng.below(3));
    c.d_model = c.heads * (2 + static_cast<int>(rng.below(4)));
    c.d_ff = 8;
    c.layers = 1;
    c.n_channels = 1 + static_cast<int>(rng.below(19));
    c.target_channels = c.n_channels + static_cast<int>(rng.below(4));
    c.seq_len = 8 + static_cast<int>(rng.below(40));
    c.patch_len = 1 + static_cast<int>(rng.below(9));
    model::Model m(c, rng.next_u64());
    const Eigen::Index b = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Matrix h = m.embed(lt::random_matrix(rng, b * c.seq_len, c.n_channels), b);
    EXPECT_EQ(h.rows(), b);
    EXPECT_EQ(h.cols(), 2 * c.d_model);
    EXPECT_TRUE(h.allFinite());
  }
}

TEST(Encode, IdenticalSamplesGiveIdenticalRows) {
  const auto c = lt::tiny_config();
  model::Model m(c, 7);
  Rng rng(5);
  const Matrix one = lt::random_matrix(rng, c.seq_len, c.n_channels);
  Matrix x(3 * c.seq_len, c.n_channels);
  x << one, one, one;
  const Matrix h = m.embed(x, 3);
  EXPECT_TRUE(h.row(0) == h.row(1));
  EXPECT_TRUE(h.row(0) == h.row(2));
  EXPECT_TRUE(m.embed(x, 3) == h);
}

TEST(Encode, WrongShapeIsShapeError) {
  const auto c = lt::tiny_config();
  model::Model m(c, 7);
  EXPECT_LEAD_ERROR(m.embed(Matrix::Zero(c.seq_len, c.n_channels + 1), 1), ErrorKind::kShape);
  EXPECT_LEAD_ERROR(m.embed(Matrix::Zero(c.seq_len + 1, c.n_channels), 1), ErrorKind::kShape);
}

TEST(Heads, ZeroWeightsGiveZeroOrUniformOutputs) {
  const auto c = lt::tiny_config();
  model::Model m(c, 8);
  for (auto& p : m.params().all())
    if (p.name.rfind("head.", 0) == 0 || p.name.rfind("classifier.", 0) == 0) p.var->value.setZero();
  nn::Tape t;
  Rng rng(6);
  const auto h = t.constant(lt::random_matrix(rng, 4, 2 * c.d_model));
  EXPECT_TRUE(m.project(t, h)->value.isZero(0.0));
  const Matrix logits = m.classify(t, h)->value;
  EXPECT_TRUE(logits.isZero(0.0));
  for (auto p : model::argmax_rows(logits)) EXPECT_EQ(p, 0);
}

TEST(Heads, ArgmaxInvariantToShift) {
  Rng rng(7);
  const Matrix l = lt::random_matrix(rng, 50, 4);
  EXPECT_EQ(model::argmax_rows(l), model::argmax_rows((l.array() + 3.0).matrix()));
  const Matrix p = model::softmax_rows(l);
  for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
}

TEST(Heads, ProjectionRejectsWrongWidth) {
  const auto c = lt::tiny_config();
  model::Model m(c, 9);
  nn::Tape t;
  EXPECT_LEAD_ERROR(m.project(t, t.constant(Matrix::Zero(2, c.d_model))), ErrorKind::kShape);
  EXPECT_LEAD_ERROR(m.classify(t, t.constant(Matrix::Zero(2, c.d_model))), ErrorKind::kShape);
}

TEST(Gradient, EncoderMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = lt::check_model_gradients(seed);
    EXPECT_LT(r.max_rel_error, 1e-3) << "seed " << seed << " worst " << r.worst_param;
    EXPECT_GT(r.tensors, 20u);
  }
}

TEST(Gradient, DropoutOnlyWithRngInTrainMode) {
  auto c = lt::tiny_config();
  c.dropout = 0.5;
  model::Model m(c, 10);
  Rng data(11);
  const Matrix x = lt::random_matrix(data, 2 * c.seq_len, c.n_channels);
  nn::Tape t;
  const Matrix eval = m.encode(t, x, 2, false)->value;
  EXPECT_TRUE(m.encode(t, x, 2, true)->value == eval);
  Rng rng(12);
  EXPECT_FALSE(m.encode(t, x, 2, true, &rng)->value == eval);
}

TEST(ParamStore, CloneIsDeepAndLoadValuesChecksLayout) {
  const auto c = lt::tiny_config();
  model::Model m(c, 13);
  auto copy = m.params().clone();
  copy.all()[0].var->value.array() += 1.0;
  EXPECT_FALSE(copy.all()[0].var->value == m.params().all()[0].var->value);
  m.load_values(copy);
  EXPECT_TRUE(copy.all()[0].var->value == m.params().all()[0].var->value);
  auto other = c;
  other.d_model = 16;
  model::Model wrong(other, 1);
  EXPECT_LEAD_ERROR(m.load_values(wrong.params()), ErrorKind::kShape);
}

}  // namespace
