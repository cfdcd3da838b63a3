#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "flowdepth/geometry.hpp"
#include "flowdepth/grid.hpp"

namespace flowdepth {

enum class DegeneracyCode : std::uint8_t { ok = 0, near_zero_denominator = 1, negative_depth = 2, masked_flow = 3 };

struct TriangulationResult {
  DepthMap depth_g;  // 0 where invalid
  Mask valid;
  Grid<std::uint8_t> code;  // DegeneracyCode per pixel

  DegeneracyCode code_at(int u, int v) const { return static_cast<DegeneracyCode>(code(u, v)); }
};

inline constexpr double kEpsDenominator = 1e-8;

/// (K^-1 p~, K^-1 (p~ + [flow; 0])), both with third component 1.
std::pair<Eigen::Vector3d, Eigen::Vector3d> normalized_correspondences(const CameraIntrinsics& camera,
                                                                       const Eigen::Vector2d& pixel,
                                                                       const Eigen::Vector2d& flow);

/// Closed-form two-view depth of every target pixel given its correspondence
/// and the relative motion. Both image axes enter one ratio. Pixels with an
/// invalid or non-finite flow, |denominator| < eps_den, or depth <= 0 are
/// masked with the matching code.
TriangulationResult triangulate_depth(const CameraIntrinsics& camera, const RigidMotion& motion,
                                      const FlowField& flow, double eps_den = kEpsDenominator);

}  // namespace flowdepth
