#pragma once

#include "flowdepth/losses.hpp"

namespace flowdepth::detail {

/// Reflected index into [0, n): -1 -> 1, n -> n - 2.
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

/// 1 - SSIM of two 3 x 3 windows given in row-major order. With
/// A = 2 mu_a mu_b + C1, B = 2 cov + C2, A' = mu_a^2 + mu_b^2 + C1 and
/// B' = var_a + var_b + C2, the numerator A'B' - AB is rewritten as
/// A' var(a - b) + B (mu_a - mu_b)^2, which has no cancellation near SSIM = 1.
template <class T>
T dissimilarity_window(const double* a, const T* b) {
  double mu_a = 0.0;
  T mu_b(0.0);
  for (int k = 0; k < 9; ++k) {
    mu_a += a[k];
    mu_b += b[k];
  }
  mu_a /= 9.0;
  mu_b /= 9.0;
  double var_a = 0.0;
  T var_b(0.0), cov(0.0), var_diff(0.0);
  for (int k = 0; k < 9; ++k) {
    const double da = a[k] - mu_a;
    const T db = b[k] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
    var_diff += (da - db) * (da - db);
  }
  var_a /= 9.0;
  var_b /= 9.0;
  cov /= 9.0;
  var_diff /= 9.0;
  const T mean_gap = mu_a - mu_b;
  const T luminance = mu_a * mu_a + mu_b * mu_b + kSsimC1;
  const T structure = 2.0 * cov + kSsimC2;
  const T den = luminance * (var_a + var_b + kSsimC2);
  return (luminance * var_diff + structure * (mean_gap * mean_gap)) / den;
}

/// The 3 x 3 reflected window of `img` around (u, v).
inline void gather_window(const Grid<double>& img, int u, int v, double* out) {
  int k = 0;
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du)
      out[k++] = img(reflect(u + du, img.width()), reflect(v + dv, img.height()));
}

}  // namespace flowdepth::detail
