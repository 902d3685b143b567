// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace lead::prep {

/// Direct-form II transposed biquad, a0 normalized to 1. First-order
/// sections have b2 = a2 = 0.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

using SosFilter = std::vector<Biquad>;

/// Butterworth designs via bilinear transform with frequency prewarping.
SosFilter butter_lowpass(int order, double cutoff, double fs);
SosFilter butter_highpass(int order, double cutoff, double fs);
/// Highpass at `lo` cascaded with lowpass at `hi`, each of `order`.
SosFilter butter_bandpass(int order, double lo, double hi, double fs);

/// |H(e^{j 2 pi f / fs})|
double magnitude_response(const SosFilter& sos, double f, double fs);

/// Samples until |h[n]| stays below `rel_tol` of its peak (capped at `cap`).
std::size_t impulse_length(const SosFilter& sos, double rel_tol = 1e-3,
                           std::size_t cap = 1 << 16);

/// Causal filtering of `x` in place, optionally from the steady state that a
/// constant input `initial_level` would have produced.
void sosfilt(const SosFilter& sos, std::span<double> x, double initial_level = 0.0,
             bool steady_start = false);

/// Forward-backward (zero-phase) filtering with odd-reflection padding of
/// min(pad, n - 1) samples at each end and steady-state initial conditions.
std::vector<double> sosfiltfilt(const SosFilter& sos, std::span<const double> x,
                                std::size_t pad);

/// Smallest-denominator p/q with q <= max_den equal to `ratio` within 1e-9
/// relative; empty pair {0,0} when none exists.
std::pair<std::int64_t, std::int64_t> rational_approx(double ratio, std::int64_t max_den);

/// Kaiser-windowed sinc lowpass, odd length, unit DC gain scaled by `gain`.
/// `cutoff` and `transition` are fractions of the sample rate.
std::vector<double> kaiser_lowpass(double cutoff, double transition, double beta,
                                   double gain);

/// Polyphase rational resampler: upsample by `up`, filter, keep every
/// `down`-th sample. Output length round(n * up / down).
std::vector<double> resample_poly(std::span<const double> x, std::int64_t up,
                                  std::int64_t down, std::span<const double> taps);

}  // namespace lead::prep
