// AVX2 variants. Built with -mavx2 only; callers reach these through the
// dispatch table after a CPUID check.

#include <immintrin.h>

#include <cfloat>

#include "kernels/impl.hpp"
#include "kernels/pixel.hpp"

namespace flowdepth::kernels {
namespace {

inline __m256d lanes_from(int u) { return _mm256_add_pd(_mm256_set1_pd(u), _mm256_setr_pd(0.0, 1.0, 2.0, 3.0)); }
inline __m256d negate(__m256d x) { return _mm256_xor_pd(x, _mm256_set1_pd(-0.0)); }
inline __m256d absolute(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

void rigid_flow_row(const ProjectionParams& p, int v, int width, const double* depth, double* fu, double* fv,
                    std::uint8_t* valid) {
  const auto& r = p.rotation;
  const auto& t = p.translation;
  const __m256d fx = _mm256_set1_pd(p.fx), fy = _mm256_set1_pd(p.fy);
  const __m256d cx = _mm256_set1_pd(p.cx), cy = _mm256_set1_pd(p.cy);
  const __m256d yn = _mm256_set1_pd((v - p.cy) / p.fy);
  const __m256d vv = _mm256_set1_pd(v);
  const __m256d zero = _mm256_setzero_pd(), dmax = _mm256_set1_pd(DBL_MAX), min_z = _mm256_set1_pd(p.min_z);
  __m256d rr[9];
  for (int i = 0; i < 9; ++i) rr[i] = _mm256_set1_pd(r[i]);
  const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]), t2 = _mm256_set1_pd(t[2]);

  int u = 0;
  for (; u + 4 <= width; u += 4) {
    const __m256d uu = lanes_from(u);
    const __m256d d = _mm256_loadu_pd(depth + u);
    const __m256d xn = _mm256_div_pd(_mm256_sub_pd(uu, cx), fx);
    const __m256d x = _mm256_mul_pd(d, xn);
    const __m256d y = _mm256_mul_pd(d, yn);
    const __m256d z = d;
    const __m256d xs = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rr[0], x), _mm256_mul_pd(rr[1], y)), _mm256_mul_pd(rr[2], z)), t0);
    const __m256d ys = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rr[3], x), _mm256_mul_pd(rr[4], y)), _mm256_mul_pd(rr[5], z)), t1);
    const __m256d zs = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rr[6], x), _mm256_mul_pd(rr[7], y)), _mm256_mul_pd(rr[8], z)), t2);
    const __m256d ok = _mm256_and_pd(
        _mm256_and_pd(_mm256_cmp_pd(d, zero, _CMP_GT_OQ), _mm256_cmp_pd(d, dmax, _CMP_LE_OQ)),
        _mm256_cmp_pd(zs, min_z, _CMP_GT_OQ));
    const __m256d flow_u = _mm256_sub_pd(_mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(fx, xs), zs), cx), uu);
    const __m256d flow_v = _mm256_sub_pd(_mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(fy, ys), zs), cy), vv);
    _mm256_storeu_pd(fu + u, _mm256_and_pd(ok, flow_u));
    _mm256_storeu_pd(fv + u, _mm256_and_pd(ok, flow_v));
    const int bits = _mm256_movemask_pd(ok);
    for (int k = 0; k < 4; ++k) valid[u + k] = static_cast<std::uint8_t>((bits >> k) & 1);
  }
  for (; u < width; ++u) pixel::rigid_flow(p, u, v, depth[u], fu[u], fv[u], valid[u]);
}

// Vertical stencil for row v at columns [u, u+4).
inline __m256d vertical_difference(const double* f, int width, int height, int v, int u) {
  const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(v) * width;
  const double* here = f + row + u;
  if (v == 0) return _mm256_mul_pd(_mm256_set1_pd(2.0), _mm256_sub_pd(_mm256_loadu_pd(here + width), _mm256_loadu_pd(here)));
  if (v == height - 1)
    return _mm256_mul_pd(_mm256_set1_pd(2.0), _mm256_sub_pd(_mm256_loadu_pd(here), _mm256_loadu_pd(here - width)));
  return _mm256_sub_pd(_mm256_loadu_pd(here + width), _mm256_loadu_pd(here - width));
}

inline __m256d horizontal_difference(const double* f, int width, int v, int u) {
  const double* here = f + static_cast<std::ptrdiff_t>(v) * width + u;
  return _mm256_sub_pd(_mm256_loadu_pd(here + 1), _mm256_loadu_pd(here - 1));
}

void divergence_row(const double* fu, const double* fv, int width, int height, int v, double* out) {
  const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(v) * width;
  auto scalar_at = [&](int u) {
    out[u] = pixel::axis_difference(fu + row + u, u, width, 1) + pixel::axis_difference(fv + row + u, v, height, width);
  };
  scalar_at(0);
  int u = 1;
  for (; u + 4 <= width - 1; u += 4)
    _mm256_storeu_pd(out + u, _mm256_add_pd(horizontal_difference(fu, width, v, u),
                                            vertical_difference(fv, width, height, v, u)));
  for (; u < width; ++u) scalar_at(u);
}

void central_gradient_row(const double* f, int width, int height, int v, double* du, double* dv) {
  const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(v) * width;
  auto scalar_at = [&](int u) {
    du[u] = pixel::axis_difference(f + row + u, u, width, 1);
    dv[u] = pixel::axis_difference(f + row + u, v, height, width);
  };
  scalar_at(0);
  int u = 1;
  for (; u + 4 <= width - 1; u += 4) {
    _mm256_storeu_pd(du + u, horizontal_difference(f, width, v, u));
    _mm256_storeu_pd(dv + u, vertical_difference(f, width, height, v, u));
  }
  for (; u < width; ++u) scalar_at(u);
}

void triangulate_row(const TriangulationParams& p, int v, int width, const double* fu, const double* fv,
                     double* depth, double* den) {
  const auto& r = p.rotation;
  const auto& t = p.translation;
  const __m256d fx = _mm256_set1_pd(p.fx), fy = _mm256_set1_pd(p.fy);
  const __m256d cx = _mm256_set1_pd(p.cx), cy = _mm256_set1_pd(p.cy);
  const __m256d vv = _mm256_set1_pd(v);
  const __m256d pty = _mm256_set1_pd((v - p.cy) / p.fy);
  __m256d rr[9];
  for (int i = 0; i < 9; ++i) rr[i] = _mm256_set1_pd(r[i]);
  const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]), t2 = _mm256_set1_pd(t[2]);

  int u = 0;
  for (; u + 4 <= width; u += 4) {
    const __m256d uu = lanes_from(u);
    const __m256d ptx = _mm256_div_pd(_mm256_sub_pd(uu, cx), fx);
    const __m256d psx = _mm256_div_pd(_mm256_sub_pd(_mm256_add_pd(uu, _mm256_loadu_pd(fu + u)), cx), fx);
    const __m256d psy = _mm256_div_pd(_mm256_sub_pd(_mm256_add_pd(vv, _mm256_loadu_pd(fv + u)), cy), fy);
    const __m256d r1p = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rr[0], ptx), _mm256_mul_pd(rr[1], pty)), rr[2]);
    const __m256d r2p = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rr[3], ptx), _mm256_mul_pd(rr[4], pty)), rr[5]);
    const __m256d r3p = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rr[6], ptx), _mm256_mul_pd(rr[7], pty)), rr[8]);
    const __m256d num = _mm256_add_pd(_mm256_sub_pd(t0, _mm256_mul_pd(psx, t2)), _mm256_sub_pd(t1, _mm256_mul_pd(psy, t2)));
    const __m256d d = _mm256_add_pd(_mm256_sub_pd(_mm256_mul_pd(psx, r3p), r1p), _mm256_sub_pd(_mm256_mul_pd(psy, r3p), r2p));
    _mm256_storeu_pd(den + u, d);
    _mm256_storeu_pd(depth + u, _mm256_div_pd(num, d));
  }
  for (; u < width; ++u) pixel::triangulate(p, u, v, fu[u], fv[u], depth[u], den[u]);
}

void differential_row(const DifferentialParams& p, int v, int width, const double* depth, const double* div,
                      const double* gu, const double* gv, double* cf, double* cd, double* qu, double* qv) {
  const __m256d t3 = _mm256_set1_pd(p.t3);
  const __m256d offset_u = _mm256_set1_pd(p.offset_u);
  const __m256d q_v = _mm256_set1_pd(v - p.offset_v);
  const __m256d eps = _mm256_set1_pd(p.eps_geo);
  const __m256d four = _mm256_set1_pd(4.0);

  int u = 0;
  for (; u + 4 <= width; u += 4) {
    const __m256d s = _mm256_add_pd(_mm256_loadu_pd(depth + u), t3);
    const __m256d ok = _mm256_cmp_pd(absolute(s), eps, _CMP_GE_OQ);
    const __m256d q_u = _mm256_sub_pd(lanes_from(u), offset_u);
    const __m256d c_f =
        _mm256_sub_pd(negate(_mm256_mul_pd(_mm256_div_pd(s, t3), _mm256_loadu_pd(div + u))), four);
    const __m256d dot =
        _mm256_add_pd(_mm256_mul_pd(q_u, _mm256_loadu_pd(gu + u)), _mm256_mul_pd(q_v, _mm256_loadu_pd(gv + u)));
    const __m256d c_d = p.inverse_form ? _mm256_mul_pd(dot, s) : negate(_mm256_div_pd(dot, s));
    _mm256_storeu_pd(cf + u, _mm256_and_pd(ok, c_f));
    _mm256_storeu_pd(cd + u, _mm256_and_pd(ok, c_d));
    _mm256_storeu_pd(qu + u, q_u);
    _mm256_storeu_pd(qv + u, q_v);
  }
  for (; u < width; ++u)
    pixel::differential(p, u, v, depth[u], div[u], gu[u], gv[u], cf[u], cd[u], qu[u], qv[u]);
}

void shifted_inverse_row(double shift, double eps, int width, const double* depth, double* out) {
  const __m256d s_shift = _mm256_set1_pd(shift), s_eps = _mm256_set1_pd(eps), one = _mm256_set1_pd(1.0);
  int u = 0;
  for (; u + 4 <= width; u += 4) {
    const __m256d s = _mm256_add_pd(_mm256_loadu_pd(depth + u), s_shift);
    const __m256d ok = _mm256_cmp_pd(absolute(s), s_eps, _CMP_GE_OQ);
    _mm256_storeu_pd(out + u, _mm256_and_pd(ok, _mm256_div_pd(one, s)));
  }
  for (; u < width; ++u) out[u] = pixel::shifted_inverse(shift, eps, depth[u]);
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{rigid_flow_row,  divergence_row,   central_gradient_row,
                                 triangulate_row, differential_row, shifted_inverse_row};
  return table;
}

}  // namespace flowdepth::kernels
