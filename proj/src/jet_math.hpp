#pragma once

// Forward-mode helpers over ceres::Jet for the per-pixel local derivatives.

#include <ceres/jet.h>

#include <Eigen/Core>
#include <array>
#include <cmath>

namespace flowdepth::detail {

template <int N>
using JetN = ceres::Jet<double, N>;

/// Constant, or the seed of local slot `slot` when slot >= 0.
template <int N>
JetN<N> seed(double value, int slot) {
  JetN<N> x(value);
  if (slot >= 0) x.v[slot] = 1.0;
  return x;
}

/// |x| with subgradient 0 inside the dead zone |x| <= tol.
template <int N>
JetN<N> dead_abs(const JetN<N>& x, double tol) {
  if (std::abs(x.a) <= tol) return JetN<N>(std::abs(x.a));
  return x.a < 0.0 ? -x : x;
}

/// |x| / den, held constant (no derivative at all) inside the dead zone, so
/// a residual at rounding level cannot pull on the denominator either.
template <int N>
JetN<N> dead_ratio(const JetN<N>& x, const JetN<N>& den, double tol) {
  if (std::abs(x.a) <= tol) return JetN<N>(std::abs(x.a) / den.a);
  return dead_abs(x, 0.0) / den;
}

template <class T>
Eigen::Matrix<T, 3, 3> rodrigues(const Eigen::Matrix<T, 3, 1>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T th2 = w.squaredNorm();
  T a, b;  // sin(th)/th and (1 - cos(th))/th^2
  double th2_value;
  if constexpr (std::is_same_v<T, double>)
    th2_value = th2;
  else
    th2_value = th2.a;
  if (th2_value < 1e-8) {
    a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
    b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
  } else {
    const T th = sqrt(th2);
    a = sin(th) / th;
    b = (1.0 - cos(th)) / th2;
  }
  Eigen::Matrix<T, 3, 3> k;
  k << T(0.0), -w.z(), w.y(), w.z(), T(0.0), -w.x(), -w.y(), w.x(), T(0.0);
  return Eigen::Matrix<T, 3, 3>::Identity() + a * k + b * (k * k);
}

/// Rotation entries with their derivatives in the axis-angle coordinates.
struct RotationJet {
  std::array<double, 9> value{};
  std::array<std::array<double, 3>, 9> d{};  // d[entry][k] = dR_entry/dw_k

  explicit RotationJet(const Eigen::Vector3d& w) {
    Eigen::Matrix<JetN<3>, 3, 1> wj;
    for (int k = 0; k < 3; ++k) wj[k] = JetN<3>(w[k], k);
    const auto r = rodrigues(wj);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        value[static_cast<std::size_t>(3 * i + j)] = r(i, j).a;
        for (int k = 0; k < 3; ++k) d[static_cast<std::size_t>(3 * i + j)][static_cast<std::size_t>(k)] = r(i, j).v[k];
      }
  }

  /// Entries as N-slot jets with the rotation coordinates at slots
  /// offset..offset+2 (constants when offset < 0). `exact` replaces the
  /// values so the forward path's rotation matrix is reproduced bit for bit.
  template <int N>
  std::array<JetN<N>, 9> lift(int offset, const Eigen::Matrix3d& exact) const {
    std::array<JetN<N>, 9> out;
    for (int e = 0; e < 9; ++e) {
      out[static_cast<std::size_t>(e)] = JetN<N>(exact(e / 3, e % 3));
      if (offset >= 0)
        for (int k = 0; k < 3; ++k) out[static_cast<std::size_t>(e)].v[offset + k] = d[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
    }
    return out;
  }
};

}  // namespace flowdepth::detail
