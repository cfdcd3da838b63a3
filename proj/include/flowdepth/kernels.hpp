#pragma once

// Row kernels for the per-pixel arithmetic shared by geometry, triangulation
// and the divergence/depth-gradient fields. Each kernel has a scalar
// reference and, where the build and CPU allow, an AVX2 variant picked at
// runtime. Variants perform the same IEEE operations in the same order, so
// their outputs are bitwise identical.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace flowdepth::simd {

enum class Level { scalar, avx2 };

/// Best level supported by both the build and the running CPU.
Level detected_level();
/// Level used by the dispatching entry points (detected_level() by default).
Level active_level();
/// Overrides the active level; throws InvalidArgumentError when unsupported.
void set_level(Level level);
bool supported(Level level);
std::string_view level_name(Level level);

}  // namespace flowdepth::simd

namespace flowdepth::kernels {

struct ProjectionParams {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  std::array<double, 3> translation{0, 0, 0};
  double min_z = 1e-9;
};

/// Flow p_s - p for row v, where p_s = proj(K (R * depth * K^-1 p~ + t)).
/// Pixels with non-positive or non-finite depth, or a transformed depth
/// <= min_z, get zero flow and valid = 0.
void rigid_flow_row(const ProjectionParams& params, int v, std::span<const double> depth,
                    std::span<double> flow_u, std::span<double> flow_v, std::span<std::uint8_t> valid);

/// Unnormalized divergence of (fu, fv) for row v of an H x W field:
/// interior  fu(u+1) - fu(u-1) + fv(v+1) - fv(v-1); borders use one-sided
/// differences scaled by 2. fu and fv are whole fields, out is one row.
void divergence_row(std::span<const double> fu, std::span<const double> fv, int width, int height, int v,
                    std::span<double> out);

/// Unnormalized central differences of a scalar field for row v, with the
/// same border rule as divergence_row.
void central_gradient_row(std::span<const double> field, int width, int height, int v, std::span<double> du,
                          std::span<double> dv);

struct TriangulationParams {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};
};

/// Two-view depth from a correspondence, summing both image axes:
///   depth = sum_i (t_i - ps_i t_3) / sum_i (ps_i r_3.pt - r_i.pt)
/// Writes the raw ratio and its denominator; classification happens later.
void triangulate_row(const TriangulationParams& params, int v, std::span<const double> flow_u,
                     std::span<const double> flow_v, std::span<double> depth, std::span<double> denominator);

struct DifferentialParams {
  double t3 = 1;
  double offset_u = 0;  // cx + fx t1/t3
  double offset_v = 0;  // cy + fy t2/t3
  double eps_geo = 1e-6;
  /// Gradients are of 1/(D + t3) instead of D.
  bool inverse_form = true;
};

/// Elementwise C^F, C^D and q for row v from the depth, the divergence of
/// the translational flow and a depth-gradient stencil (see losses.hpp).
/// Pixels with |D + t3| < eps_geo get zeros.
void differential_row(const DifferentialParams& params, int v, std::span<const double> depth,
                      std::span<const double> divergence, std::span<const double> grad_u,
                      std::span<const double> grad_v, std::span<double> c_f, std::span<double> c_d,
                      std::span<double> q_u, std::span<double> q_v);

/// 1 / (depth + shift), or 0 where |depth + shift| < eps.
void shifted_inverse_row(double shift, double eps, std::span<const double> depth, std::span<double> out);

}  // namespace flowdepth::kernels
