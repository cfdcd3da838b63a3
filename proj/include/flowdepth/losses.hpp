#pragma once

#include "flowdepth/geometry.hpp"
#include "flowdepth/grid.hpp"
#include "flowdepth/triangulate.hpp"

namespace flowdepth {

/// A masked-mean loss. guard_dominated_count counts valid pixels whose
/// denominator sat below its guard.
struct LossValue {
  double value = 0.0;
  long valid_pixel_count = 0;
  long guard_dominated_count = 0;
};

inline constexpr double kPhotometricAlpha = 0.85;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kEpsDiv = 1e-6;
inline constexpr double kEpsDpc = 1e-4;
inline constexpr double kEpsFlow = 1e-3;
inline constexpr double kEpsT3 = 1e-6;
inline constexpr double kEpsGeo = 1e-6;

/// Per-pixel SSIM from 3 x 3 mean-pooled statistics with reflected borders,
/// averaged over channels.
ScalarField ssim(const Image& a, const Image& b);

/// Mean over `mask` of alpha (1 - SSIM)/2 + (1 - alpha)|I_t - I_w|, with the
/// L1 term averaged over channels.
LossValue photometric_loss(const Image& target, const Image& warped, const Mask& mask,
                           double alpha = kPhotometricAlpha);

/// Mean over valid pixels of |D^G - D^C| / max(D^C, eps_div). Throws
/// InvalidDepthError where D^C is not positive on a valid pixel.
LossValue cgdc_loss(const TriangulationResult& d_g, const DepthMap& d_c, double eps_div = kEpsDiv);

/// How the depth gradient in C^D is discretized.
enum class GradientStencil {
  /// Central differences of 1/(D + t3), then C^D = q . grad(1/(D + t3)) (D + t3).
  /// Exact on the affine-inverse-shift family.
  inverse_depth,
  /// Central differences of D, then C^D = -q . grad D / (D + t3).
  depth,
};

struct DifferentialOptions {
  GradientStencil stencil = GradientStencil::inverse_depth;
  double eps_t3 = kEpsT3;
  double eps_geo = kEpsGeo;
};

/// C^F, C^D and q over the interior. With S = D + t3 (the depth of the point
/// in the source frame when R = I):
///   q   = (u - cx - fx t1/t3, v - cy - fy t2/t3)
///   C^F = -(S/t3) div F^Tra - 4
///   C^D = -q . grad D / S
/// where div and grad are the unnormalized stencils, so C^F = C^D on exact data.
struct DifferentialFields {
  ScalarField c_f;
  ScalarField c_d;
  Grid<double> q_u;
  Grid<double> q_v;
  Mask valid;
};

/// Throws LateralMotionError when |t3| <= eps_t3. Valid pixels are interior,
/// have a valid translational flow at themselves and their 4 neighbours,
/// and |D + t3| >= eps_geo at the same support.
DifferentialFields differential_fields(const CameraIntrinsics& camera, const RigidMotion& motion,
                                       const DepthMap& d_c, const FlowField& f_tra,
                                       const DifferentialOptions& options = {});

/// Same, with C^D from a supplied (normalized) depth gradient, doubled to
/// match the unnormalized divergence.
DifferentialFields differential_fields(const CameraIntrinsics& camera, const RigidMotion& motion,
                                       const DepthMap& d_c, const FlowField& f_tra,
                                       const GradientField& analytic_gradient, const DifferentialOptions& options = {});

/// Mean over valid pixels of |C^D - C^F| / (|C^D| + eps_dpc).
LossValue dpc_loss(const DifferentialFields& fields, double eps_dpc = kEpsDpc);

/// Mean over pixels valid in both fields of |F^R - F^O|_1 / (|F^O|_1 + eps_flow).
LossValue bsca_loss(const FlowField& f_r, const FlowField& f_o, double eps_flow = kEpsFlow);

/// Edge-aware smoothness on mean-normalized depth: per axis, the mean of
/// |forward difference of D/mean(D)| exp(-mean_c |forward difference of I|),
/// summed over the two axes.
LossValue edge_aware_smoothness(const DepthMap& depth, const Image& image);

struct DepthMetrics {
  double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0, log10 = 0;
  double delta1 = 0, delta2 = 0, delta3 = 0;
  long count = 0;
};

/// Standard monocular depth metrics over `mask`. Throws NoValidPixelsError
/// on an empty mask, InvalidDepthError on non-positive values inside it.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const Mask& mask);

/// Weights of the combined objective w_p L_p + w_c L_c + w_d L_d + w_b L_b.
/// These defaults are configuration, not published values.
struct LossWeights {
  double w_p = 1.0;
  double w_c = 0.5;
  double w_d = 0.1;
  double w_b = 0.1;

  bool all_zero() const noexcept { return w_p == 0.0 && w_c == 0.0 && w_d == 0.0 && w_b == 0.0; }
};

}  // namespace flowdepth
