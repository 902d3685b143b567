// SPDX-License-Identifier: Apache-2.0
#include "lead/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "lead/error.hpp"

namespace lead::nn {

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix Node::grad_or_zero() const {
  if (grad.size() != 0) return grad;
  return Matrix::Zero(value.rows(), value.cols());
}

Var parameter(Matrix value, bool trainable) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = trainable;
  return n;
}

Var Tape::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  nodes_.push_back(n);
  return n;
}

Var Tape::record(Matrix value, std::initializer_list<const Var*> inputs,
                 std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var* in : inputs)
    if (in && *in && (*in)->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward = std::move(backward);
  nodes_.push_back(n);
  return n;
}

void Tape::backward(const Var& root) {
  if (root->value.rows() != 1 || root->value.cols() != 1)
    fail(ErrorKind::kShape, "backward needs a scalar root");
  root->grad = Matrix::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.grad.size() != 0) n.backward(n);
  }
}

void Tape::clear() { nodes_.clear(); }

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

namespace ops {
namespace {

void check(bool ok, const char* what) {
  if (!ok) fail(ErrorKind::kShape, what);
}

}  // namespace

Var linear(Tape& t, const Var& x, const Var& w, const Var& b) {
  check(x->value.cols() == w->value.rows(), "linear: input width does not match weight rows");
  Matrix y(x->value.rows(), w->value.cols());
  y.noalias() = x->value * w->value;
  if (b) {
    check(b->value.rows() == 1 && b->value.cols() == w->value.cols(), "linear: bad bias shape");
    y.rowwise() += b->value.row(0);
  }
  Var xp = x;
  Var wp = w;
  Var bp = b;
  return t.record(std::move(y), {&x, &w, &b}, [xp, wp, bp](Node& out) {
    const Matrix& g = out.grad;
    if (xp->requires_grad) {
      Matrix dx(g.rows(), wp->value.rows());
      dx.noalias() = g * wp->value.transpose();
      xp->accumulate(dx);
    }
    if (wp->requires_grad) {
      Matrix dw(wp->value.rows(), wp->value.cols());
      dw.noalias() = xp->value.transpose() * g;
      wp->accumulate(dw);
    }
    if (bp && bp->requires_grad) bp->accumulate(g.colwise().sum());
  });
}

Var linear_nt(Tape& t, const Var& x, const Var& w, const Var& b) {
  check(x->value.cols() == w->value.cols(), "linear_nt: input width does not match weight cols");
  Matrix y(x->value.rows(), w->value.rows());
  y.noalias() = x->value * w->value.transpose();
  if (b) {
    check(b->value.rows() == 1 && b->value.cols() == w->value.rows(), "linear_nt: bad bias shape");
    y.rowwise() += b->value.row(0);
  }
  Var xp = x;
  Var wp = w;
  Var bp = b;
  return t.record(std::move(y), {&x, &w, &b}, [xp, wp, bp](Node& out) {
    const Matrix& g = out.grad;
    if (xp->requires_grad) {
      Matrix dx(g.rows(), wp->value.cols());
      dx.noalias() = g * wp->value;
      xp->accumulate(dx);
    }
    if (wp->requires_grad) {
      Matrix dw(wp->value.rows(), wp->value.cols());
      dw.noalias() = g.transpose() * xp->value;
      wp->accumulate(dw);
    }
    if (bp && bp->requires_grad) bp->accumulate(g.colwise().sum());
  });
}

Var add(Tape& t, const Var& a, const Var& b) {
  check(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
        "add: shape mismatch");
  Var ap = a;
  Var bp = b;
  return t.record(a->value + b->value, {&a, &b}, [ap, bp](Node& out) {
    if (ap->requires_grad) ap->accumulate(out.grad);
    if (bp->requires_grad) bp->accumulate(out.grad);
  });
}

Var add_tiled(Tape& t, const Var& x, const Matrix& table) {
  const Eigen::Index s = table.rows();
  check(s > 0 && x->value.rows() % s == 0 && x->value.cols() == table.cols(),
        "add_tiled: shape mismatch");
  Matrix y = x->value;
  for (Eigen::Index b = 0; b < y.rows() / s; ++b) y.middleRows(b * s, s) += table;
  Var xp = x;
  return t.record(std::move(y), {&x}, [xp](Node& out) { xp->accumulate(out.grad); });
}

Var layer_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x->value.rows(), d = x->value.cols();
  check(gamma->value.rows() == 1 && gamma->value.cols() == d && beta->value.cols() == d,
        "layer_norm: bad affine shape");
  Matrix xhat(n, d);
  Vector inv_sd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x->value.row(i);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    inv_sd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mean) * inv_sd(i);
  }
  Matrix y = (xhat.array().rowwise() * gamma->value.row(0).array()).matrix();
  y.rowwise() += beta->value.row(0);
  Var xp = x;
  Var gp = gamma;
  Var bp = beta;
  return t.record(std::move(y), {&x, &gamma, &beta},
                  [xp, gp, bp, xhat = std::move(xhat), inv_sd = std::move(inv_sd)](Node& out) {
                    const Matrix& g = out.grad;
                    if (gp->requires_grad)
                      gp->accumulate((g.array() * xhat.array()).colwise().sum().matrix());
                    if (bp->requires_grad) bp->accumulate(g.colwise().sum());
                    if (!xp->requires_grad) return;
                    const Eigen::Index d = g.cols();
                    Matrix dx(g.rows(), d);
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                      const Eigen::ArrayXd dxh =
                          (g.row(i).array() * gp->value.row(0).array()).transpose();
                      const Eigen::ArrayXd xh = xhat.row(i).array().transpose();
                      const double m1 = dxh.mean();
                      const double m2 = (dxh * xh).mean();
                      dx.row(i) = ((dxh - m1 - xh * m2) * inv_sd(i)).transpose();
                    }
                    (void)d;
                    xp->accumulate(dx);
                  });
}

Var gelu(Tape& t, const Var& x) {
  Matrix y = x->value.unaryExpr([](double v) { return gelu_value(v); });
  Var xp = x;
  return t.record(std::move(y), {&x}, [xp](Node& out) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = xp->value.unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) +
             v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    xp->accumulate((d.array() * out.grad.array()).matrix());
  });
}

Var dropout(Tape& t, const Var& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) fail(ErrorKind::kConfig, "dropout rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x->value.rows(), x->value.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
  Matrix y = (x->value.array() * mask.array()).matrix();
  Var xp = x;
  return t.record(std::move(y), {&x}, [xp, mask = std::move(mask)](Node& out) {
    xp->accumulate((out.grad.array() * mask.array()).matrix());
  });
}

Var attention(Tape& t, const Var& q, const Var& k, const Var& v, Eigen::Index batch,
              Eigen::Index seq, Eigen::Index heads) {
  const Eigen::Index d = q->value.cols();
  check(batch > 0 && seq > 0 && heads > 0 && d % heads == 0, "attention: bad geometry");
  check(q->value.rows() == batch * seq && k->value.rows() == batch * seq &&
            v->value.rows() == batch * seq && k->value.cols() == d && v->value.cols() == d,
        "attention: q/k/v shape mismatch");
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(batch * heads));
  Matrix o(batch * seq, d);
  Matrix s(seq, seq);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto qb = q->value.block(b * seq, h * dh, seq, dh);
      const auto kb = k->value.block(b * seq, h * dh, seq, dh);
      const auto vb = v->value.block(b * seq, h * dh, seq, dh);
      s.noalias() = qb * kb.transpose();
      s *= scale;
      for (Eigen::Index i = 0; i < seq; ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
      }
      o.block(b * seq, h * dh, seq, dh).noalias() = s * vb;
      (*probs)[static_cast<std::size_t>(b * heads + h)] = s;
    }
  }
  Var qp = q;
  Var kp = k;
  Var vp = v;
  return t.record(std::move(o), {&q, &k, &v},
                  [qp, kp, vp, probs, batch, seq, heads, dh, scale](Node& out) {
                    const Eigen::Index d = out.grad.cols();
                    Matrix dq = Matrix::Zero(batch * seq, d);
                    Matrix dk = Matrix::Zero(batch * seq, d);
                    Matrix dv = Matrix::Zero(batch * seq, d);
                    Matrix dp(seq, seq);
                    for (Eigen::Index b = 0; b < batch; ++b) {
                      for (Eigen::Index h = 0; h < heads; ++h) {
                        const Matrix& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
                        const auto go = out.grad.block(b * seq, h * dh, seq, dh);
                        const auto qb = qp->value.block(b * seq, h * dh, seq, dh);
                        const auto kb = kp->value.block(b * seq, h * dh, seq, dh);
                        const auto vb = vp->value.block(b * seq, h * dh, seq, dh);
                        dv.block(b * seq, h * dh, seq, dh).noalias() = p.transpose() * go;
                        dp.noalias() = go * vb.transpose();
                        const Eigen::VectorXd rs = (dp.array() * p.array()).rowwise().sum();
                        dp = (p.array() * (dp.array().colwise() - rs.array())).matrix() * scale;
                        dq.block(b * seq, h * dh, seq, dh).noalias() = dp * kb;
                        dk.block(b * seq, h * dh, seq, dh).noalias() = dp.transpose() * qb;
                      }
                    }
                    if (qp->requires_grad) qp->accumulate(dq);
                    if (kp->requires_grad) kp->accumulate(dk);
                    if (vp->requires_grad) vp->accumulate(dv);
                  });
}

Var batched_transpose(Tape& t, const Var& x, Eigen::Index batch) {
  check(batch > 0 && x->value.rows() % batch == 0, "batched_transpose: rows not divisible");
  const Eigen::Index r = x->value.rows() / batch, c = x->value.cols();
  Matrix y(batch * c, r);
  for (Eigen::Index b = 0; b < batch; ++b)
    y.middleRows(b * c, c) = x->value.middleRows(b * r, r).transpose();
  Var xp = x;
  return t.record(std::move(y), {&x}, [xp, batch, r, c](Node& out) {
    Matrix dx(batch * r, c);
    for (Eigen::Index b = 0; b < batch; ++b)
      dx.middleRows(b * r, r) = out.grad.middleRows(b * c, c).transpose();
    xp->accumulate(dx);
  });
}

Var patchify(Tape& t, const Var& x, Eigen::Index batch, Eigen::Index patch_len) {
  check(batch > 0 && patch_len > 0 && x->value.rows() % batch == 0, "patchify: bad geometry");
  const Eigen::Index tt = x->value.rows() / batch, c = x->value.cols();
  const Eigen::Index n = (tt + patch_len - 1) / patch_len;
  const Eigen::Index width = patch_len * c;
  Matrix y = Matrix::Zero(batch * n, width);
  // Row-major storage makes each padded block a contiguous (n x L*C) view.
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double* src = x->value.data() + b * tt * c;
    double* dst = y.data() + b * n * width;
    std::copy(src, src + tt * c, dst);
  }
  Var xp = x;
  return t.record(std::move(y), {&x}, [xp, batch, tt, c, n, width](Node& out) {
    Matrix dx(batch * tt, c);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const double* src = out.grad.data() + b * n * width;
      std::copy(src, src + tt * c, dx.data() + b * tt * c);
    }
    xp->accumulate(dx);
  });
}

Var last_rows(Tape& t, const Var& x, Eigen::Index batch) {
  check(batch > 0 && x->value.rows() % batch == 0, "last_rows: rows not divisible");
  const Eigen::Index s = x->value.rows() / batch;
  Matrix y(batch, x->value.cols());
  for (Eigen::Index b = 0; b < batch; ++b) y.row(b) = x->value.row(b * s + s - 1);
  Var xp = x;
  return t.record(std::move(y), {&x}, [xp, batch, s](Node& out) {
    Matrix dx = Matrix::Zero(xp->value.rows(), xp->value.cols());
    for (Eigen::Index b = 0; b < batch; ++b) dx.row(b * s + s - 1) = out.grad.row(b);
    xp->accumulate(dx);
  });
}

Var concat_cols(Tape& t, const Var& a, const Var& b) {
  check(a->value.rows() == b->value.rows(), "concat_cols: row mismatch");
  Matrix y(a->value.rows(), a->value.cols() + b->value.cols());
  y << a->value, b->value;
  Var ap = a;
  Var bp = b;
  return t.record(std::move(y), {&a, &b}, [ap, bp](Node& out) {
    const Eigen::Index ca = ap->value.cols();
    if (ap->requires_grad) ap->accumulate(out.grad.leftCols(ca));
    if (bp->requires_grad) bp->accumulate(out.grad.rightCols(bp->value.cols()));
  });
}

Var cross_entropy(Tape& t, const Var& logits, std::span<const std::int32_t> labels) {
  const Eigen::Index n = logits->value.rows(), k = logits->value.cols();
  check(static_cast<Eigen::Index>(labels.size()) == n && n > 0, "cross_entropy: label count");
  Matrix p(n, k);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) fail(ErrorKind::kData, "cross_entropy: label out of range");
    const double m = logits->value.row(i).maxCoeff();
    p.row(i) = (logits->value.row(i).array() - m).exp();
    const double z = p.row(i).sum();
    p.row(i) /= z;
    loss += -(logits->value(i, y) - m - std::log(z));
  }
  Matrix value(1, 1);
  value(0, 0) = loss / static_cast<double>(n);
  std::vector<std::int32_t> ys(labels.begin(), labels.end());
  Var lp = logits;
  return t.record(std::move(value), {&logits}, [lp, p = std::move(p), ys = std::move(ys)](Node& out) {
    Matrix g = p;
    for (std::size_t i = 0; i < ys.size(); ++i) g(static_cast<Eigen::Index>(i), ys[i]) -= 1.0;
    g *= out.grad(0, 0) / static_cast<double>(ys.size());
    lp->accumulate(g);
  });
}

}  // namespace ops
}  // namespace lead::nn
