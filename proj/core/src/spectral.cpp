// SPDX-License-Identifier: Apache-2.0
#include "lead/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>

#include "lead/error.hpp"

namespace lead::spectral {

using cplx = std::complex<double>;

std::vector<cplx> rfft(std::span<const double> x) {
  if (x.empty()) return {};
  Eigen::FFT<double> fft;
  std::vector<double> in(x.begin(), x.end());
  std::vector<cplx> out;
  fft.fwd(out, in);
  return out;
}

std::vector<double> irfft(const std::vector<cplx>& spectrum, std::size_t n) {
  if (n == 0) return {};
  if (spectrum.size() != n) fail(ErrorKind::kShape, "irfft expects a full-length spectrum");
  Eigen::FFT<double> fft;
  std::vector<cplx> full(spectrum);
  std::vector<cplx> out;
  fft.inv(out, full);
  std::vector<double> real(n);
  for (std::size_t i = 0; i < n; ++i) real[i] = out[i].real();
  return real;
}

std::vector<double> periodogram(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const auto spec = rfft(x);
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  std::vector<double> p(n / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    p[k] = std::norm(spec[k]) / nn * (unpaired ? 1.0 : 2.0);
  }
  return p;
}

double band_power(std::span<const double> x, double fs, double lo, double hi) {
  const auto p = periodogram(x);
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = bin_frequency(k, x.size(), fs);
    if (f >= lo && f < hi) sum += p[k];
  }
  return sum;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> band_limited_noise(std::size_t n, double fs, double lo, double hi,
                                       double power, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (n < 2 || power <= 0.0) return out;
  std::vector<std::size_t> bins;
  for (std::size_t k = 1; 2 * k < n; ++k) {
    const double f = bin_frequency(k, n, fs);
    if (f >= lo && f < hi) bins.push_back(k);
  }
  if (bins.empty()) return out;
  std::vector<cplx> spec(n, cplx{0.0, 0.0});
  for (std::size_t k : bins) {
    const cplx z{rng.normal(), rng.normal()};
    spec[k] = z;
    spec[n - k] = std::conj(z);
  }
  auto x = irfft(spec, n);
  // E|z|^2 = 2 per bin; each conjugate pair contributes 2|z|^2 / n^2 to the variance.
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double expected = 4.0 * static_cast<double>(bins.size()) / nn;
  const double scale = std::sqrt(power / expected);
  for (double& v : x) v *= scale;
  return x;
}

}  // namespace lead::spectral
