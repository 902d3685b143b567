// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lead/autodiff.hpp"
#include "lead/sample.hpp"

namespace lead::obj {

/// Projections of two views (rows aligned: row i of za and zb come from the
/// same window) plus the subject of each row.
struct ContrastBatch {
  Matrix za;
  Matrix zb;
  std::vector<std::int64_t> subject_ids;
  double tau = 0.1;
  double lambda1 = 0.5;
  double lambda2 = 0.5;

  Eigen::Index size() const { return za.rows(); }
  void validate() const;
};

inline constexpr double kNormFloor = 1e-12;

/// u.v / (max(|u|, 1e-12) max(|v|, 1e-12)).
double cosine_sim(std::span<const double> u, std::span<const double> v);

double sample_loss(const ContrastBatch& batch);
double subject_loss(const ContrastBatch& batch);
/// lambda1 * sample_loss + lambda2 * subject_loss.
double joint_loss(const ContrastBatch& batch);

struct LossGrad {
  double loss = 0.0;
  Matrix dza;
  Matrix dzb;
};

LossGrad sample_loss_grad(const ContrastBatch& batch);
LossGrad subject_loss_grad(const ContrastBatch& batch);
LossGrad joint_loss_grad(const ContrastBatch& batch);

/// Joint loss on a stacked (2B x D) projection whose first B rows are view a
/// and last B rows view b.
nn::Var joint_loss_op(nn::Tape& tape, const nn::Var& z, std::span<const std::int64_t> subject_ids,
                      double tau, double lambda1, double lambda2);

}  // namespace lead::obj
