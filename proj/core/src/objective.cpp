// SPDX-License-Identifier: Apache-2.0
#include "lead/objective.hpp"

#include <cmath>
#include <string>

#include "lead/error.hpp"

namespace lead::obj {
namespace {

/// Positive-target weights: row i spreads lambda1 on column i and lambda2
/// evenly over the same-subject columns. Rows sum to lambda1 + lambda2.
Matrix target_weights(const std::vector<std::int64_t>& ids, double lambda1, double lambda2) {
  const auto b = static_cast<Eigen::Index>(ids.size());
  Matrix w = Matrix::Zero(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    w(i, i) += lambda1;
    if (lambda2 == 0.0) continue;
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < b; ++k)
      if (ids[static_cast<std::size_t>(k)] == ids[static_cast<std::size_t>(i)]) ++count;
    for (Eigen::Index k = 0; k < b; ++k)
      if (ids[static_cast<std::size_t>(k)] == ids[static_cast<std::size_t>(i)])
        w(i, k) += lambda2 / static_cast<double>(count);
  }
  return w;
}

struct Normalized {
  Matrix u;
  Vector norms;
};

Normalized normalize_rows(const Matrix& z) {
  Normalized n{Matrix(z.rows(), z.cols()), Vector(z.rows())};
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    n.norms(i) = std::max(z.row(i).norm(), kNormFloor);
    n.u.row(i) = z.row(i) / n.norms(i);
  }
  return n;
}

/// Backpropagates through u = z / max(|z|, floor).
Matrix normalize_backward(const Matrix& z, const Normalized& n, const Matrix& du) {
  Matrix dz(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (z.row(i).norm() > kNormFloor) {
      const double proj = n.u.row(i).dot(du.row(i));
      dz.row(i) = (du.row(i) - proj * n.u.row(i)) / n.norms(i);
    } else {
      dz.row(i) = du.row(i) / n.norms(i);
    }
  }
  return dz;
}

LossGrad weighted_loss(const ContrastBatch& batch, double lambda1, double lambda2, bool want_grad) {
  batch.validate();
  const Eigen::Index b = batch.size();
  const Normalized na = normalize_rows(batch.za);
  const Normalized nb = normalize_rows(batch.zb);
  Matrix s(b, b);
  s.noalias() = na.u * nb.u.transpose();
  s /= batch.tau;
  const Matrix w = target_weights(batch.subject_ids, lambda1, lambda2);
  const double mass = lambda1 + lambda2;

  LossGrad out;
  Matrix softmax(b, b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double m = s.row(i).maxCoeff();
    softmax.row(i) = (s.row(i).array() - m).exp();
    const double z = softmax.row(i).sum();
    softmax.row(i) /= z;
    const double lse = m + std::log(z);
    total += mass * lse - w.row(i).dot(s.row(i));
  }
  out.loss = total / static_cast<double>(b);
  if (!want_grad) return out;

  const Matrix g = (mass * softmax - w) / static_cast<double>(b);
  Matrix dua(b, batch.za.cols()), dub(b, batch.zb.cols());
  dua.noalias() = g * nb.u / batch.tau;
  dub.noalias() = g.transpose() * na.u / batch.tau;
  out.dza = normalize_backward(batch.za, na, dua);
  out.dzb = normalize_backward(batch.zb, nb, dub);
  return out;
}

void check_weights(const ContrastBatch& batch) {
  if (batch.lambda1 < 0.0 || batch.lambda2 < 0.0 ||
      std::abs(batch.lambda1 + batch.lambda2 - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "loss weights must be non-negative and sum to 1");
}

}  // namespace

void ContrastBatch::validate() const {
  if (!(tau > 0.0)) fail(ErrorKind::kConfig, "temperature must be positive");
  if (za.rows() < 1) fail(ErrorKind::kShape, "contrastive batch is empty");
  if (za.rows() != zb.rows() || za.cols() != zb.cols())
    fail(ErrorKind::kShape, "view projections differ in shape");
  if (static_cast<Eigen::Index>(subject_ids.size()) != za.rows())
    fail(ErrorKind::kShape, "one subject id per row is required");
  if (!za.allFinite() || !zb.allFinite()) fail(ErrorKind::kNumeric, "non-finite projection");
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(ErrorKind::kShape, "cosine_sim: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::max(std::sqrt(nu), kNormFloor) * std::max(std::sqrt(nv), kNormFloor));
}

double sample_loss(const ContrastBatch& batch) { return weighted_loss(batch, 1.0, 0.0, false).loss; }
double subject_loss(const ContrastBatch& batch) { return weighted_loss(batch, 0.0, 1.0, false).loss; }

double joint_loss(const ContrastBatch& batch) {
  check_weights(batch);
  return weighted_loss(batch, batch.lambda1, batch.lambda2, false).loss;
}

LossGrad sample_loss_grad(const ContrastBatch& batch) { return weighted_loss(batch, 1.0, 0.0, true); }
LossGrad subject_loss_grad(const ContrastBatch& batch) { return weighted_loss(batch, 0.0, 1.0, true); }

LossGrad joint_loss_grad(const ContrastBatch& batch) {
  check_weights(batch);
  return weighted_loss(batch, batch.lambda1, batch.lambda2, true);
}

nn::Var joint_loss_op(nn::Tape& tape, const nn::Var& z, std::span<const std::int64_t> subject_ids,
                      double tau, double lambda1, double lambda2) {
  const Eigen::Index rows = z->value.rows();
  if (rows % 2 != 0 || static_cast<Eigen::Index>(subject_ids.size()) * 2 != rows)
    fail(ErrorKind::kShape, "stacked projections need 2B rows for B subject ids");
  const Eigen::Index b = rows / 2;
  ContrastBatch batch;
  batch.za = z->value.topRows(b);
  batch.zb = z->value.bottomRows(b);
  batch.subject_ids.assign(subject_ids.begin(), subject_ids.end());
  batch.tau = tau;
  batch.lambda1 = lambda1;
  batch.lambda2 = lambda2;
  LossGrad lg = joint_loss_grad(batch);
  if (!std::isfinite(lg.loss)) fail(ErrorKind::kNumeric, "contrastive loss is not finite");
  Matrix value(1, 1);
  value(0, 0) = lg.loss;
  Matrix dz(rows, z->value.cols());
  dz << lg.dza, lg.dzb;
  nn::Var zp = z;
  return tape.record(std::move(value), {&z}, [zp, dz = std::move(dz)](nn::Node& out) {
    zp->accumulate(dz * out.grad(0, 0));
  });
}

}  // namespace lead::obj
