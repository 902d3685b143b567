// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lead/model.hpp"

namespace lead::optim {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay over the trainable entries of a store.
class AdamW {
 public:
  AdamW(model::ParamStore& params, AdamWConfig cfg = {});
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  model::ParamStore& params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

/// L2 norm over every trainable gradient.
double global_grad_norm(const model::ParamStore& params);
/// Rescales gradients so the global norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_grad_norm(model::ParamStore& params, double max_norm);

/// Cosine annealing from `base` at step 0 to zero at step total - 1.
double cosine_lr(double base, std::size_t step, std::size_t total);

/// Running equal-weight average of parameter snapshots.
class SwaAverager {
 public:
  void update(const model::ParamStore& snapshot);
  std::size_t count() const { return n_; }
  model::ParamStore average() const;

 private:
  model::ParamStore avg_;
  std::size_t n_ = 0;
};

}  // namespace lead::optim
