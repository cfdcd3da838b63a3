#include "flowdepth/triangulate.hpp"

#include <cmath>

#include "flowdepth/kernels.hpp"
#include "flowdepth/parallel.hpp"

namespace flowdepth {

std::pair<Eigen::Vector3d, Eigen::Vector3d> normalized_correspondences(const CameraIntrinsics& camera,
                                                                       const Eigen::Vector2d& pixel,
                                                                       const Eigen::Vector2d& flow) {
  const Eigen::Vector3d pt((pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy, 1.0);
  const Eigen::Vector3d ps(((pixel.x() + flow.x()) - camera.cx) / camera.fx,
                           ((pixel.y() + flow.y()) - camera.cy) / camera.fy, 1.0);
  return {pt, ps};
}

TriangulationResult triangulate_depth(const CameraIntrinsics& camera, const RigidMotion& motion,
                                      const FlowField& flow, double eps_den) {
  const int h = flow.height(), w = flow.width();
  if (!flow.u.same_shape(flow.v) || !flow.u.same_shape(flow.valid))
    throw DimensionError("triangulate_depth: flow planes differ in shape");
  kernels::TriangulationParams p;
  p.fx = camera.fx;
  p.fy = camera.fy;
  p.cx = camera.cx;
  p.cy = camera.cy;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation[static_cast<std::size_t>(3 * r + c)] = motion.rotation()(r, c);
  for (int i = 0; i < 3; ++i) p.translation[static_cast<std::size_t>(i)] = motion.translation()[i];

  TriangulationResult out{DepthMap(h, w), Mask(h, w, 0), Grid<std::uint8_t>(h, w)};
  Grid<double> den(h, w);
  parallel_rows(h, [&](int v) {
    kernels::triangulate_row(p, v, flow.u.row(v), flow.v.row(v), out.depth_g.row(v), den.row(v));
    for (int u = 0; u < w; ++u) {
      DegeneracyCode code = DegeneracyCode::ok;
      const double d = out.depth_g(u, v);
      if (!flow.valid(u, v) || !std::isfinite(flow.u(u, v)) || !std::isfinite(flow.v(u, v)))
        code = DegeneracyCode::masked_flow;
      else if (!(std::abs(den(u, v)) >= eps_den))
        code = DegeneracyCode::near_zero_denominator;
      else if (!(d > 0.0) || !std::isfinite(d))
        code = DegeneracyCode::negative_depth;
      out.code(u, v) = static_cast<std::uint8_t>(code);
      out.valid(u, v) = code == DegeneracyCode::ok ? 1 : 0;
      if (code != DegeneracyCode::ok) out.depth_g(u, v) = 0.0;
    }
  });
  return out;
}

}  // namespace flowdepth
