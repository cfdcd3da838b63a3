#pragma once

#include <Eigen/Core>

#include "flowdepth/grid.hpp"

namespace flowdepth {

/// Transformed points with depth at or below this are treated as behind the camera.
inline constexpr double kMinDepth = 1e-9;

/// Pinhole intrinsics without skew.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  CameraIntrinsics() = default;
  /// Throws InvalidArgumentError unless fx > 0 and fy > 0 (both finite).
  CameraIntrinsics(double fx, double fy, double cx, double cy);

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse() const;
  Eigen::Vector2d principal_point() const { return {cx, cy}; }
};

/// X_source = rotation * X_target + translation.
class RigidMotion {
 public:
  RigidMotion() = default;
  /// Throws InvalidArgumentError unless rotation is orthonormal with det +1
  /// (tolerance 1e-12) and translation is finite.
  RigidMotion(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidMotion from_axis_angle(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& axis_angle);
/// Inverse of rotation_exp for angles in [0, pi].
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation);

/// Differentiable pose coordinates: axis-angle rotation (0..2) followed by
/// the translation (3..5).
struct TwistParams {
  Eigen::Matrix<double, 6, 1> values = Eigen::Matrix<double, 6, 1>::Zero();

  Eigen::Vector3d rotation() const { return values.head<3>(); }
  Eigen::Vector3d translation() const { return values.tail<3>(); }
  double& operator[](int i) { return values[i]; }
  double operator[](int i) const { return values[i]; }

  RigidMotion to_motion() const;
  static TwistParams from_motion(const RigidMotion& motion);
};

/// Pixel of a camera-frame point; throws BehindCameraError when X_z <= 0.
Eigen::Vector2d project(const CameraIntrinsics& camera, const Eigen::Vector3d& point);
/// depth * K^-1 [p; 1]; throws InvalidDepthError when depth <= 0.
Eigen::Vector3d backproject(const CameraIntrinsics& camera, const Eigen::Vector2d& pixel, double depth);

/// Flow from the target view to the source view induced by camera motion
/// over the given target depth. Invalid where depth is not positive or the
/// transformed point falls behind the camera.
FlowField rigid_flow(const CameraIntrinsics& camera, const RigidMotion& motion, const DepthMap& depth);

/// Flow of a pure rotation; depth cancels, so only the grid size is needed.
FlowField rotational_flow(const CameraIntrinsics& camera, const Eigen::Matrix3d& rotation, int height, int width);

/// flow_o - flow_rot, valid where both are.
FlowField translational_flow(const FlowField& flow_o, const FlowField& flow_rot);

/// Unnormalized discrete divergence (twice the analytic value on interior
/// pixels). Requires at least 3 x 3.
ScalarField divergence(const FlowField& flow);

struct GradientField {
  Grid<double> du;
  Grid<double> dv;
};

/// Unnormalized central differences matching divergence().
GradientField central_gradient(const ScalarField& field);

/// Interior pixels whose four stencil neighbours are all set in `valid`.
Mask stencil_support(const Mask& valid);

struct WarpResult {
  Image image;
  Mask valid;
};

/// Bilinear resampling of `source` at p + flow(p). The sample position is
/// clamped to the image for the value; valid is false when it leaves the
/// rectangle [0, W-1] x [0, H-1] or the flow is invalid.
WarpResult warp(const Image& source, const FlowField& flow);

}  // namespace flowdepth
