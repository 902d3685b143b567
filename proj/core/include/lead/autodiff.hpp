// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lead/rng.hpp"
#include "lead/sample.hpp"

namespace lead::nn {

/// A value in the computation graph. `grad` stays empty until something
/// flows into it.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
  /// Gradient or a zero matrix of the value's shape.
  Matrix grad_or_zero() const;
};

using Var = std::shared_ptr<Node>;

/// Trainable (or frozen) tensor living outside any tape.
Var parameter(Matrix value, bool trainable = true);

/// Records operations in execution order and replays them backwards.
class Tape {
 public:
  Var constant(Matrix value);
  /// Creates the output node of an operation over `inputs`. The closure is
  /// kept only when some input requires a gradient.
  Var record(Matrix value, std::initializer_list<const Var*> inputs,
             std::function<void(Node&)> backward);

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and runs every closure.
  void backward(const Var& root);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Var> nodes_;
};

namespace ops {

/// x W + b with W stored (in x out) and b (1 x out); `b` may be null.
Var linear(Tape& t, const Var& x, const Var& w, const Var& b);
/// x W^T + b with W stored (out x in).
Var linear_nt(Tape& t, const Var& x, const Var& w, const Var& b);
Var add(Tape& t, const Var& a, const Var& b);
/// Adds a fixed (S x D) table to each consecutive S-row block of x.
Var add_tiled(Tape& t, const Var& x, const Matrix& table);
Var layer_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
Var gelu(Tape& t, const Var& x);
/// Inverted dropout with keep-probability 1 - p.
Var dropout(Tape& t, const Var& x, double p, Rng& rng);
/// Scaled dot-product attention over `batch` blocks of `seq` rows with
/// `heads` column groups. q, k, v are (batch*seq x D).
Var attention(Tape& t, const Var& q, const Var& k, const Var& v, Eigen::Index batch,
              Eigen::Index seq, Eigen::Index heads);
/// (batch*R x K) -> (batch*K x R), transposing each block.
Var batched_transpose(Tape& t, const Var& x, Eigen::Index batch);
/// (batch*T x C) -> (batch*N x L*C), N = ceil(T / L), zero rows appended
/// to each block so that T becomes N*L.
Var patchify(Tape& t, const Var& x, Eigen::Index batch, Eigen::Index patch_len);
/// Last row of every block: (batch*S x D) -> (batch x D).
Var last_rows(Tape& t, const Var& x, Eigen::Index batch);
Var concat_cols(Tape& t, const Var& a, const Var& b);
/// Mean cross-entropy of softmax(logits) against integer labels; 1 x 1.
Var cross_entropy(Tape& t, const Var& logits, std::span<const std::int32_t> labels);

}  // namespace ops

double gelu_value(double x);

}  // namespace lead::nn
