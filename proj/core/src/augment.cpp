// SPDX-License-Identifier: Apache-2.0
#include "lead/augment.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lead/error.hpp"
#include "lead/spectral.hpp"

namespace lead::aug {

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kFlip: return "flip";
    case Kind::kTimeMask: return "tmask";
    case Kind::kFreqMask: return "fmask";
    case Kind::kChannelMask: return "cmask";
    case Kind::kJitter: return "jitter";
    case Kind::kDropout: return "dropout";
  }
  return "unknown";
}

Kind parse_kind(std::string_view name) {
  for (Kind k : kAllKinds)
    if (to_string(k) == name) return k;
  fail(ErrorKind::kConfig, "unknown augmentation kind '" + std::string(name) + "'");
}

void AugmentationParams::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(flip_prob)) fail(ErrorKind::kConfig, "flip_prob must lie in [0, 1]");
  if (!unit(mask_ratio)) fail(ErrorKind::kConfig, "mask_ratio must lie in [0, 1]");
  if (!(jitter_scale >= 0.0) || !std::isfinite(jitter_scale))
    fail(ErrorKind::kConfig, "jitter_scale must be non-negative");
  if (enabled_kinds.empty()) fail(ErrorKind::kConfig, "enabled_kinds must not be empty");
}

std::size_t mask_count(double ratio, std::size_t n) {
  const double raw = std::ceil(ratio * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, raw)));
}

std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

std::vector<std::complex<double>> masked_inverse(std::span<const double> x,
                                                 const std::vector<std::size_t>& bins) {
  const std::size_t n = x.size();
  auto spec = spectral::rfft(x);
  for (std::size_t k : bins) {
    if (k > n / 2) fail(ErrorKind::kShape, "frequency bin out of range");
    spec[k] = 0.0;
    spec[(n - k) % n] = 0.0;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> out;
  fft.inv(out, spec);
  return out;
}

Matrix apply(const Matrix& x, Kind kind, const AugmentationParams& params, Rng& rng) {
  if (std::find(params.enabled_kinds.begin(), params.enabled_kinds.end(), kind) ==
      params.enabled_kinds.end())
    fail(ErrorKind::kConfig, "augmentation '" + std::string(to_string(kind)) + "' is not enabled");
  const auto T = static_cast<std::size_t>(x.rows());
  const auto C = static_cast<std::size_t>(x.cols());
  Matrix y = x;
  switch (kind) {
    case Kind::kFlip:
      if (rng.bernoulli(params.flip_prob)) y = x.colwise().reverse();
      break;
    case Kind::kTimeMask:
      for (std::size_t t : choose_distinct(T, mask_count(params.mask_ratio, T), rng))
        y.row(static_cast<Eigen::Index>(t)).setZero();
      break;
    case Kind::kChannelMask:
      for (std::size_t c : choose_distinct(C, mask_count(params.mask_ratio, C), rng))
        y.col(static_cast<Eigen::Index>(c)).setZero();
      break;
    case Kind::kFreqMask: {
      if (T == 0) break;
      const std::size_t n_bins = T / 2 + 1;
      const auto bins = choose_distinct(n_bins, mask_count(params.mask_ratio, n_bins), rng);
      std::vector<double> column(T);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < T; ++t)
          column[t] = x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
        const auto z = masked_inverse(column, bins);
        for (std::size_t t = 0; t < T; ++t)
          y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = z[t].real();
      }
      break;
    }
    case Kind::kJitter:
      for (Eigen::Index t = 0; t < y.rows(); ++t)
        for (Eigen::Index c = 0; c < y.cols(); ++c) y(t, c) += params.jitter_scale * rng.uniform();
      break;
    case Kind::kDropout:
      for (Eigen::Index t = 0; t < y.rows(); ++t)
        for (Eigen::Index c = 0; c < y.cols(); ++c)
          if (rng.bernoulli(params.mask_ratio)) y(t, c) = 0.0;
      break;
  }
  return y;
}

EpochSample apply(const EpochSample& sample, Kind kind, const AugmentationParams& params,
                  Rng& rng) {
  EpochSample out = sample;
  out.data = apply(Matrix(sample.data.cast<double>()), kind, params, rng).cast<float>();
  return out;
}

std::pair<Matrix, Matrix> make_views(const Matrix& x, const AugmentationParams& params, Rng& rng) {
  params.validate();
  const auto& kinds = params.enabled_kinds;
  const Kind a = kinds[rng.below(kinds.size())];
  const Kind b = kinds[rng.below(kinds.size())];
  Matrix va = apply(x, a, params, rng);
  Matrix vb = apply(x, b, params, rng);
  return {std::move(va), std::move(vb)};
}

std::pair<EpochSample, EpochSample> make_views(const EpochSample& sample,
                                               const AugmentationParams& params, Rng& rng) {
  auto [a, b] = make_views(Matrix(sample.data.cast<double>()), params, rng);
  EpochSample va = sample, vb = sample;
  va.data = a.cast<float>();
  vb.data = b.cast<float>();
  return {std::move(va), std::move(vb)};
}

}  // namespace lead::aug
