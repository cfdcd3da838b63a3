#pragma once

// Scalar per-pixel arithmetic. This is the reference the vector variants
// mirror operation for operation; they also call it for row tails.

#include <cfloat>
#include <cmath>
#include <cstdint>

#include "flowdepth/kernels.hpp"

namespace flowdepth::kernels::pixel {
// Internal linkage: the AVX2 translation unit must not donate its copies.
namespace {

inline void rigid_flow(const ProjectionParams& p, double u, double v, double d, double& fu, double& fv,
                       std::uint8_t& valid) {
  const auto& r = p.rotation;
  const auto& t = p.translation;
  const double xn = (u - p.cx) / p.fx;
  const double yn = (v - p.cy) / p.fy;
  const double x = d * xn;
  const double y = d * yn;
  const double z = d;
  const double xs = r[0] * x + r[1] * y + r[2] * z + t[0];
  const double ys = r[3] * x + r[4] * y + r[5] * z + t[1];
  const double zs = r[6] * x + r[7] * y + r[8] * z + t[2];
  const bool ok = d > 0.0 && d <= DBL_MAX && zs > p.min_z;
  if (ok) {
    fu = (p.fx * xs / zs + p.cx) - u;
    fv = (p.fy * ys / zs + p.cy) - v;
  } else {
    fu = 0.0;
    fv = 0.0;
  }
  valid = ok ? 1 : 0;
}

inline void triangulate(const TriangulationParams& p, double u, double v, double fu, double fv, double& depth,
                        double& den) {
  const auto& r = p.rotation;
  const auto& t = p.translation;
  const double ptx = (u - p.cx) / p.fx;
  const double pty = (v - p.cy) / p.fy;
  const double psx = ((u + fu) - p.cx) / p.fx;
  const double psy = ((v + fv) - p.cy) / p.fy;
  const double r1p = r[0] * ptx + r[1] * pty + r[2];
  const double r2p = r[3] * ptx + r[4] * pty + r[5];
  const double r3p = r[6] * ptx + r[7] * pty + r[8];
  const double num = (t[0] - psx * t[2]) + (t[1] - psy * t[2]);
  den = (psx * r3p - r1p) + (psy * r3p - r2p);
  depth = num / den;
}

inline void differential(const DifferentialParams& p, double u, double v, double d, double div, double gu,
                         double gv, double& cf, double& cd, double& qu, double& qv) {
  const double s = d + p.t3;
  qu = u - p.offset_u;
  qv = v - p.offset_v;
  if (!(std::fabs(s) >= p.eps_geo)) {
    cf = 0.0;
    cd = 0.0;
    return;
  }
  cf = -(s / p.t3 * div) - 4.0;
  const double dot = qu * gu + qv * gv;
  cd = p.inverse_form ? dot * s : -(dot / s);
}

inline double shifted_inverse(double shift, double eps, double d) {
  const double s = d + shift;
  return std::fabs(s) >= eps ? 1.0 / s : 0.0;
}

/// Stencil along one axis: interior central difference, borders one-sided x2.
inline double axis_difference(const double* f, int i, int n, std::ptrdiff_t stride) {
  if (i == 0) return 2.0 * (f[stride] - f[0]);
  if (i == n - 1) return 2.0 * (f[0] - f[-stride]);
  return f[stride] - f[-stride];
}

}  // namespace
}  // namespace flowdepth::kernels::pixel
