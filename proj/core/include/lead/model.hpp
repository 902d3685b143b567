// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lead/autodiff.hpp"
#include "lead/rng.hpp"
#include "lead/sample.hpp"

namespace lead::model {

struct ModelConfig {
  int d_model = 128;
  int layers = 6;  // per branch
  int heads = 8;
  int d_ff = 256;
  int patch_len = 8;
  int target_channels = 128;
  int n_classes = 2;
  int seq_len = kWindow;
  int n_channels = kMontageSize;
  double tau = 0.1;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double dropout = 0.1;

  void validate() const;
  int n_patches() const { return (seq_len + patch_len - 1) / patch_len; }
  int head_dim() const { return d_model / heads; }
  bool operator==(const ModelConfig&) const = default;
};

struct Param {
  std::string name;
  nn::Var var;
  bool trainable = true;
};

/// Ordered, name-indexed parameter set.
class ParamStore {
 public:
  const nn::Var& add(std::string name, Matrix value, bool trainable = true);
  const nn::Var& get(std::string_view name) const;
  const Param* find(std::string_view name) const;
  const std::vector<Param>& all() const { return params_; }
  std::vector<Param>& all() { return params_; }
  std::size_t count(bool trainable_only = false) const;
  void zero_grad();
  /// Deep copy of values; gradients are not copied.
  ParamStore clone() const;

 private:
  std::vector<Param> params_;
};

/// pe[p][2i] = sin(p / 10000^(2i/dim)), pe[p][2i+1] = cos(...).
Matrix sinusoid_table(int rows, int dim);

/// Dual-branch encoder f, projection head g and linear classifier c.
class Model {
 public:
  /// Deterministic initialization: fan-in scaled uniform weights, zero
  /// biases, unit layer-norm gains, fixed sinusoidal position tables.
  Model(const ModelConfig& cfg, std::uint64_t seed);
  /// Adopts existing parameters; names and shapes are checked against cfg.
  Model(const ModelConfig& cfg, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// x stacks `batch` windows of seq_len x n_channels rows. Returns h
  /// (batch x 2D). Dropout is active only when `train` is set and `rng`
  /// is given.
  nn::Var encode(nn::Tape& tape, const Matrix& x, Eigen::Index batch, bool train,
                 Rng* rng = nullptr) const;
  /// z = g(h), (batch x D).
  nn::Var project(nn::Tape& tape, const nn::Var& h) const;
  /// logits = c(h), (batch x n_classes).
  nn::Var classify(nn::Tape& tape, const nn::Var& h) const;

  /// Eval-mode helpers that do not keep a graph.
  Matrix embed(const Matrix& x, Eigen::Index batch) const;
  Matrix logits(const Matrix& x, Eigen::Index batch) const;

  /// Copies parameter values from `other`, which must have identical layout.
  void load_values(const ParamStore& other);

 private:
  nn::Var branch(nn::Tape& tape, nn::Var x, const std::string& prefix, Eigen::Index batch,
                 Eigen::Index seq, bool train, Rng* rng) const;
  void check_layout() const;

  ModelConfig cfg_;
  ParamStore params_;
};

/// Expected (name, rows, cols, trainable) layout for a configuration.
struct ParamSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool trainable = true;
};
std::vector<ParamSpec> param_layout(const ModelConfig& cfg);

/// Stacks windows into the (B*T x C) layout used by encode.
Matrix stack(std::span<const EpochSample* const> samples);
Matrix stack(const SampleList& samples, std::span<const std::size_t> indices);

/// Index of the largest logit per row; ties go to the lowest index.
std::vector<std::int32_t> argmax_rows(const Matrix& logits);
/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

}  // namespace lead::model
