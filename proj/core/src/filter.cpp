// SPDX-License-Identifier: Apache-2.0
#include "lead/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "lead/error.hpp"

namespace lead::prep {
namespace {

using cplx = std::complex<double>;

void check_design(int order, double cutoff, double fs) {
  if (order < 1) fail(ErrorKind::kConfig, "filter order must be >= 1");
  if (!(fs > 0.0)) fail(ErrorKind::kConfig, "sampling rate must be positive");
  if (!(cutoff > 0.0) || !(cutoff < fs / 2.0))
    fail(ErrorKind::kConfig, "cutoff " + std::to_string(cutoff) +
                                 " Hz must lie strictly inside (0, Nyquist=" +
                                 std::to_string(fs / 2.0) + ")");
}

/// Digital poles of an order-N Butterworth with cutoff `fc`; the analog
/// lowpass and highpass prototypes share the same pole set on |p| = 1.
std::vector<cplx> digital_poles(int order, double fc, double fs) {
  const double warped = 2.0 * fs * std::tan(std::numbers::pi * fc / fs);
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    const double angle = std::numbers::pi * (2.0 * k + 1.0 + order) / (2.0 * order);
    const cplx s = warped * std::polar(1.0, angle);
    poles.push_back((2.0 * fs + s) / (2.0 * fs - s));
  }
  return poles;
}

SosFilter design(int order, double fc, double fs, bool highpass) {
  check_design(order, fc, fs);
  const auto poles = digital_poles(order, fc, fs);
  SosFilter sos;
  for (int k = 0; k < order / 2; ++k) {
    const cplx p = poles[static_cast<std::size_t>(k)];
    Biquad q;
    q.a1 = -2.0 * p.real();
    q.a2 = std::norm(p);
    if (highpass) {
      const double g = (1.0 - q.a1 + q.a2) / 4.0;
      q.b0 = g, q.b1 = -2.0 * g, q.b2 = g;
    } else {
      const double g = (1.0 + q.a1 + q.a2) / 4.0;
      q.b0 = g, q.b1 = 2.0 * g, q.b2 = g;
    }
    sos.push_back(q);
  }
  if (order % 2 == 1) {
    const double p = poles[static_cast<std::size_t>(order / 2)].real();
    Biquad q;
    q.a1 = -p;
    if (highpass) {
      const double g = (1.0 - q.a1) / 2.0;
      q.b0 = g, q.b1 = -g;
    } else {
      const double g = (1.0 + q.a1) / 2.0;
      q.b0 = g, q.b1 = g;
    }
    sos.push_back(q);
  }
  return sos;
}

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half = x / 2.0;
  for (int k = 1; k < 500; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

}  // namespace

SosFilter butter_lowpass(int order, double cutoff, double fs) {
  return design(order, cutoff, fs, false);
}

SosFilter butter_highpass(int order, double cutoff, double fs) {
  return design(order, cutoff, fs, true);
}

SosFilter butter_bandpass(int order, double lo, double hi, double fs) {
  if (!(lo < hi)) fail(ErrorKind::kConfig, "bandpass requires lo < hi");
  SosFilter sos = butter_highpass(order, lo, fs);
  const SosFilter lp = butter_lowpass(order, hi, fs);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

double magnitude_response(const SosFilter& sos, double f, double fs) {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& q : sos) h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
  return std::abs(h);
}

void sosfilt(const SosFilter& sos, std::span<double> x, double initial_level,
             bool steady_start) {
  double level = initial_level;
  for (const auto& q : sos) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_start) {
      const double denom = 1.0 + q.a1 + q.a2;
      const double y = denom != 0.0 ? level * (q.b0 + q.b1 + q.b2) / denom : 0.0;
      z1 = y - q.b0 * level;
      z2 = q.b2 * level - q.a2 * y;
      level = y;
    }
    for (double& v : x) {
      const double in = v;
      const double y = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * y + z2;
      z2 = q.b2 * in - q.a2 * y;
      v = y;
    }
  }
}

std::size_t impulse_length(const SosFilter& sos, double rel_tol, std::size_t cap) {
  std::vector<double> h(cap, 0.0);
  if (cap == 0) return 0;
  h[0] = 1.0;
  sosfilt(sos, h);
  double peak = 0.0;
  for (double v : h) peak = std::max(peak, std::abs(v));
  std::size_t last = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (std::abs(h[i]) > rel_tol * peak) last = i;
  return last + 1;
}

std::vector<double> sosfiltfilt(const SosFilter& sos, std::span<const double> x,
                                std::size_t pad) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t p = std::min(pad, n - 1);
  std::vector<double> ext(n + 2 * p);
  for (std::size_t i = 0; i < p; ++i) ext[i] = 2.0 * x[0] - x[p - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(p));
  for (std::size_t i = 0; i < p; ++i) ext[p + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  sosfilt(sos, ext, ext.front(), true);
  std::reverse(ext.begin(), ext.end());
  sosfilt(sos, ext, ext.front(), true);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(p),
          ext.begin() + static_cast<std::ptrdiff_t>(p + n)};
}

std::pair<std::int64_t, std::int64_t> rational_approx(double ratio, std::int64_t max_den) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) return {0, 0};
  // Continued-fraction convergents h/k.
  std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(ratio));
  std::int64_t k_prev = 0, k = 1;
  double frac = ratio - std::floor(ratio);
  for (int iter = 0; iter < 64; ++iter) {
    if (h > 0 && std::abs(static_cast<double>(h) / static_cast<double>(k) - ratio) <= 1e-9 * ratio)
      return {h, k};
    if (frac < 1e-15) break;
    const double inv = 1.0 / frac;
    const auto a = static_cast<std::int64_t>(std::floor(inv));
    frac = inv - std::floor(inv);
    const std::int64_t h_next = a * h + h_prev;
    const std::int64_t k_next = a * k + k_prev;
    if (k_next > max_den) break;
    h_prev = h, h = h_next;
    k_prev = k, k = k_next;
  }
  if (h > 0 && k <= max_den &&
      std::abs(static_cast<double>(h) / static_cast<double>(k) - ratio) <= 1e-9 * ratio)
    return {h, k};
  return {0, 0};
}

std::vector<double> kaiser_lowpass(double cutoff, double transition, double beta,
                                   double gain) {
  if (!(cutoff > 0.0 && cutoff < 0.5) || !(transition > 0.0))
    fail(ErrorKind::kConfig, "invalid Kaiser lowpass design");
  const double atten = beta / 0.1102 + 8.7;
  auto length = static_cast<std::size_t>(
      std::ceil((atten - 7.95) / (2.285 * 2.0 * std::numbers::pi * transition))) + 1;
  if (length % 2 == 0) ++length;
  const double mid = static_cast<double>(length - 1) / 2.0;
  const double i0_beta = bessel_i0(beta);
  std::vector<double> taps(length);
  double sum = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double arg = 2.0 * cutoff * t;
    const double sinc =
        t == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = mid > 0 ? t / mid : 0.0;
    const double window = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    taps[n] = 2.0 * cutoff * sinc * window;
    sum += taps[n];
  }
  for (double& v : taps) v *= gain / sum;
  return taps;
}

std::vector<double> resample_poly(std::span<const double> x, std::int64_t up,
                                  std::int64_t down, std::span<const double> taps) {
  if (up < 1 || down < 1) fail(ErrorKind::kConfig, "resampling factors must be positive");
  const auto n = static_cast<std::int64_t>(x.size());
  if (n == 0) return {};
  const std::int64_t out_len = (2 * n * up + down) / (2 * down);
  const auto n_taps = static_cast<std::int64_t>(taps.size());
  const std::int64_t delay = (n_taps - 1) / 2;

  auto sample = [&](std::int64_t i) {
    if (i < 0) return 2.0 * x[0] - x[static_cast<std::size_t>(std::min(-i, n - 1))];
    if (i >= n)
      return 2.0 * x[static_cast<std::size_t>(n - 1)] -
             x[static_cast<std::size_t>(std::max<std::int64_t>(2 * (n - 1) - i, 0))];
    return x[static_cast<std::size_t>(i)];
  };
  auto floor_div = [](std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
  };

  std::vector<double> y(static_cast<std::size_t>(out_len));
  for (std::int64_t m = 0; m < out_len; ++m) {
    const std::int64_t base = m * down + delay;
    const std::int64_t i_hi = floor_div(base, up);
    const std::int64_t i_lo = -floor_div(-(base - (n_taps - 1)), up);
    double acc = 0.0;
    for (std::int64_t i = i_lo; i <= i_hi; ++i)
      acc += taps[static_cast<std::size_t>(base - i * up)] * sample(i);
    y[static_cast<std::size_t>(m)] = acc;
  }
  return y;
}

}  // namespace lead::prep
