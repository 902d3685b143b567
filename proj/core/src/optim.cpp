// SPDX-License-Identifier: Apache-2.0
#include "lead/optim.hpp"

#include <cmath>
#include <numbers>

#include "lead/error.hpp"

namespace lead::optim {

AdamW::AdamW(model::ParamStore& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& p : params_.all()) {
    m_.push_back(Matrix::Zero(p.var->value.rows(), p.var->value.cols()));
    v_.push_back(Matrix::Zero(p.var->value.rows(), p.var->value.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& all = params_.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& p = all[i];
    if (!p.trainable || p.var->grad.size() == 0) continue;
    Matrix& w = p.var->value;
    const Matrix& g = p.var->grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    w -= (lr * cfg_.weight_decay) * w;
    w.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

double global_grad_norm(const model::ParamStore& params) {
  double sq = 0.0;
  for (const auto& p : params.all())
    if (p.trainable && p.var->grad.size() != 0) sq += p.var->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(model::ParamStore& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) fail(ErrorKind::kNumeric, "gradient norm is not finite");
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / (norm + 1e-6);
    for (auto& p : params.all())
      if (p.trainable && p.var->grad.size() != 0) p.var->grad *= scale;
  }
  return norm;
}

double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total <= 1) return base;
  const double frac = static_cast<double>(std::min(step, total - 1)) / static_cast<double>(total - 1);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * frac));
}

void SwaAverager::update(const model::ParamStore& snapshot) {
  if (n_ == 0) {
    avg_ = snapshot.clone();
    n_ = 1;
    return;
  }
  if (snapshot.all().size() != avg_.all().size())
    fail(ErrorKind::kShape, "SWA snapshot layout changed");
  ++n_;
  const double inv = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < avg_.all().size(); ++i) {
    Matrix& a = avg_.all()[i].var->value;
    a += (snapshot.all()[i].var->value - a) * inv;
  }
}

model::ParamStore SwaAverager::average() const {
  if (n_ == 0) fail(ErrorKind::kConfig, "SWA average requested with no snapshots");
  return avg_.clone();
}

}  // namespace lead::optim
