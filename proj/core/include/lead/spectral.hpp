// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <span>
#include <vector>

#include "lead/rng.hpp"

namespace lead::spectral {

/// One-sided power per DFT bin k = 0..n/2, scaled so the bins sum to the
/// mean square of `x`.
std::vector<double> periodogram(std::span<const double> x);

/// Frequency of bin k for an n-point transform at rate fs.
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  return static_cast<double>(k) * fs / static_cast<double>(n);
}

/// Sum of periodogram bins with lo <= f < hi.
double band_power(std::span<const double> x, double fs, double lo, double hi);

double rms(std::span<const double> x);

/// Forward real DFT (full length n, Hermitian) and its real inverse.
std::vector<std::complex<double>> rfft(std::span<const double> x);
std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum, std::size_t n);

/// Gaussian noise whose spectrum is flat on [lo, hi) and zero elsewhere,
/// scaled to expected variance `power`. Bins at DC and Nyquist are never
/// filled, so the output has zero mean.
std::vector<double> band_limited_noise(std::size_t n, double fs, double lo, double hi,
                                       double power, Rng& rng);

}  // namespace lead::spectral
