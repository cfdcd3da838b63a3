#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "flowdepth/geometry.hpp"
#include "flowdepth/grid.hpp"

namespace flowdepth {

enum class SceneFamily { affine_inverse_shift, fronto_plane, step_edge, sphere_bump };

std::string_view family_name(SceneFamily family);
/// Throws InvalidArgumentError for unknown names.
SceneFamily parse_family(std::string_view name);

/// Sum of three sinusoids in target pixel coordinates (radians per pixel).
struct TextureSpec {
  double mean = 0.5;
  std::array<double, 3> amplitude{0.12, 0.09, 0.07};
  std::array<double, 3> freq_u{0.23, 0.071, 0.157};
  std::array<double, 3> freq_v{0.061, 0.211, 0.129};
  std::array<double, 3> phase{0.0, 1.3, 2.1};
  int channels = 1;

  bool textured() const noexcept { return amplitude[0] != 0.0 || amplitude[1] != 0.0 || amplitude[2] != 0.0; }
  double evaluate(double u, double v, int channel) const;
  static TextureSpec flat(double mean = 0.5);
};

/// A surface patch that moves by `translation` on top of the camera motion.
struct DynamicObjectSpec {
  enum class Shape { rectangle, ellipse };
  Shape shape = Shape::rectangle;
  double u_min = 0, v_min = 0, u_max = 0, v_max = 0;  // bounding box in target pixels
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  bool contains(double u, double v) const noexcept;
};

struct SceneSpec {
  SceneFamily family = SceneFamily::affine_inverse_shift;
  // affine-inverse-shift: 1 / (D + t3) = a + b u + c v, so the source-frame
  // depth of every point is the reciprocal of an affine function.
  double a = 0.2, b = 1e-3, c = 5e-4;
  // fronto-plane
  double plane_depth = 5.0;
  // step-edge: near_depth for u < edge_u, far_depth otherwise
  double near_depth = 4.0, far_depth = 6.0, edge_u = 48.0;
  // sphere-bump: base_depth - bump_height * (1 - r^2/R^2)^2 inside radius R
  double base_depth = 6.0, bump_height = 1.5, bump_radius = 20.0, bump_u = 48.0, bump_v = 36.0;
  TextureSpec texture;
  std::optional<DynamicObjectSpec> dynamic;
};

/// Depth of the scene surface seen at a (continuous) target pixel.
double scene_depth(const SceneSpec& spec, const RigidMotion& motion, double u, double v);

/// Closed-form (dD/du, dD/dv) at a target pixel.
Eigen::Vector2d analytic_depth_gradient(const SceneSpec& spec, const Eigen::Vector2d& pixel);

/// Ground-truth package for one synthetic image pair.
struct SceneBundle {
  CameraIntrinsics camera;
  RigidMotion motion;
  DepthMap depth_gt;
  /// Exact flow: rigid flow on static pixels, object motion on dynamic ones.
  FlowField flow_gt;
  Image image_t;
  Image image_s;
  GradientField analytic_depth_gradient;
  /// Analytic divergence of flow_gt (normalized operator).
  ScalarField analytic_flow_divergence;
  Mask dynamic_mask;
  /// Target pixels whose surface point is hidden in the source view.
  Mask occluded;
};

/// Throws InvalidSceneError when depth is not positive over the grid or the
/// dynamic object is not strictly inside the image.
SceneBundle synthesize(const SceneSpec& spec, const CameraIntrinsics& camera, const RigidMotion& motion, int height,
                       int width);

/// Scene, camera, motion and grid size: the on-disk scene description.
struct SceneFile {
  SceneSpec spec;
  CameraIntrinsics camera{100.0, 100.0, 48.0, 36.0};
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();  // axis-angle
  Eigen::Vector3d translation{0.3, 0.1, 0.05};
  int width = 96;
  int height = 72;

  RigidMotion motion() const { return RigidMotion::from_axis_angle(rotation, translation); }
  SceneBundle synthesize() const;
};

/// Parses key=value lines ('#' starts a comment). A size override replaces
/// width/height before defaults that depend on them (cx, cy, edge_u, bump
/// center) are resolved. Throws InvalidArgumentError on unknown keys or
/// malformed values.
SceneFile parse_scene(std::string_view text, std::optional<std::pair<int, int>> size_override = std::nullopt);
/// Writes every parameter, one per line; parse_scene(format_scene(f)) == f.
std::string format_scene(const SceneFile& file);
SceneFile load_scene(const std::string& path, std::optional<std::pair<int, int>> size_override = std::nullopt);

}  // namespace flowdepth
