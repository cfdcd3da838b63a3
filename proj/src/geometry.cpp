#include "flowdepth/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "flowdepth/kernels.hpp"
#include "flowdepth/parallel.hpp"
#include "sampling.hpp"

namespace flowdepth {

CameraIntrinsics::CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
  if (!(fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy)))
    throw InvalidArgumentError("focal lengths must be positive and finite");
  if (!(std::isfinite(cx) && std::isfinite(cy))) throw InvalidArgumentError("principal point must be finite");
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

RigidMotion::RigidMotion(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  constexpr double tol = 1e-12;
  const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= tol) || !(std::abs(rotation.determinant() - 1.0) <= tol))
    throw InvalidArgumentError("rotation must be orthonormal with determinant +1");
  if (!translation.allFinite()) throw InvalidArgumentError("translation must be finite");
}

RigidMotion RigidMotion::from_axis_angle(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& translation) {
  return RigidMotion(rotation_exp(axis_angle), translation);
}

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

RigidMotion TwistParams::to_motion() const { return RigidMotion(rotation_exp(rotation()), translation()); }

TwistParams TwistParams::from_motion(const RigidMotion& motion) {
  TwistParams twist;
  twist.values.head<3>() = rotation_log(motion.rotation());
  twist.values.tail<3>() = motion.translation();
  return twist;
}

Eigen::Vector2d project(const CameraIntrinsics& camera, const Eigen::Vector3d& point) {
  if (!(point.z() > 0.0)) throw BehindCameraError("point is behind the camera (z <= 0)");
  return {camera.fx * point.x() / point.z() + camera.cx, camera.fy * point.y() / point.z() + camera.cy};
}

Eigen::Vector3d backproject(const CameraIntrinsics& camera, const Eigen::Vector2d& pixel, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw InvalidDepthError("depth must be positive and finite");
  return depth * Eigen::Vector3d((pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy, 1.0);
}

namespace {

kernels::ProjectionParams projection_params(const CameraIntrinsics& camera, const Eigen::Matrix3d& rotation,
                                            const Eigen::Vector3d& translation) {
  kernels::ProjectionParams p;
  p.fx = camera.fx;
  p.fy = camera.fy;
  p.cx = camera.cx;
  p.cy = camera.cy;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation[static_cast<std::size_t>(3 * r + c)] = rotation(r, c);
  for (int i = 0; i < 3; ++i) p.translation[static_cast<std::size_t>(i)] = translation[i];
  p.min_z = kMinDepth;
  return p;
}

FlowField project_field(const kernels::ProjectionParams& params, const DepthMap& depth) {
  FlowField flow(depth.height(), depth.width());
  parallel_rows(depth.height(), [&](int v) {
    kernels::rigid_flow_row(params, v, depth.row(v), flow.u.row(v), flow.v.row(v), flow.valid.row(v));
  });
  return flow;
}

}  // namespace

FlowField rigid_flow(const CameraIntrinsics& camera, const RigidMotion& motion, const DepthMap& depth) {
  return project_field(projection_params(camera, motion.rotation(), motion.translation()), depth);
}

FlowField rotational_flow(const CameraIntrinsics& camera, const Eigen::Matrix3d& rotation, int height, int width) {
  // Unit depth: the homogeneous scale cancels in the projection.
  return project_field(projection_params(camera, rotation, Eigen::Vector3d::Zero()), DepthMap(height, width, 1.0));
}

FlowField translational_flow(const FlowField& flow_o, const FlowField& flow_rot) {
  if (!flow_o.u.same_shape(flow_rot.u)) throw DimensionError("translational_flow: flow shapes differ");
  FlowField out(flow_o.height(), flow_o.width());
  for (std::size_t i = 0; i < out.u.size(); ++i) {
    out.u.data()[i] = flow_o.u.data()[i] - flow_rot.u.data()[i];
    out.v.data()[i] = flow_o.v.data()[i] - flow_rot.v.data()[i];
    out.valid.data()[i] = (flow_o.valid.data()[i] && flow_rot.valid.data()[i]) ? 1 : 0;
  }
  return out;
}

ScalarField divergence(const FlowField& flow) {
  const int h = flow.height(), w = flow.width();
  if (h < 3 || w < 3) throw DimensionError("divergence needs a grid of at least 3 x 3");
  ScalarField out(h, w);
  parallel_rows(h, [&](int v) { kernels::divergence_row(flow.u.values(), flow.v.values(), w, h, v, out.row(v)); });
  return out;
}

GradientField central_gradient(const ScalarField& field) {
  const int h = field.height(), w = field.width();
  if (h < 3 || w < 3) throw DimensionError("central_gradient needs a grid of at least 3 x 3");
  GradientField g{Grid<double>(h, w), Grid<double>(h, w)};
  parallel_rows(h, [&](int v) { kernels::central_gradient_row(field.values(), w, h, v, g.du.row(v), g.dv.row(v)); });
  return g;
}

Mask stencil_support(const Mask& valid) {
  const int h = valid.height(), w = valid.width();
  Mask out(h, w, 0);
  for (int v = 1; v + 1 < h; ++v)
    for (int u = 1; u + 1 < w; ++u)
      out(u, v) = (valid(u, v) && valid(u - 1, v) && valid(u + 1, v) && valid(u, v - 1) && valid(u, v + 1)) ? 1 : 0;
  return out;
}

WarpResult warp(const Image& source, const FlowField& flow) {
  const int h = source.height(), w = source.width();
  if (flow.height() != h || flow.width() != w) throw DimensionError("warp: image and flow shapes differ");
  WarpResult out{Image(h, w, source.channels()), Mask(h, w, 0)};
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      double x = u, y = v;
      bool ok = flow.valid(u, v) != 0;
      if (ok) {
        x += flow.u(u, v);
        y += flow.v(u, v);
        ok = x >= 0.0 && x <= w - 1 && y >= 0.0 && y <= h - 1;
        if (!std::isfinite(x) || !std::isfinite(y)) x = u, y = v;
      }
      out.valid(u, v) = ok ? 1 : 0;
      for (int c = 0; c < source.channels(); ++c) out.image.channel(c)(u, v) = detail::bilinear(source.channel(c), x, y);
    }
  });
  return out;
}

}  // namespace flowdepth
