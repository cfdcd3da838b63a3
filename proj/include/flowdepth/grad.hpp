#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowdepth/geometry.hpp"
#include "flowdepth/grid.hpp"
#include "flowdepth/losses.hpp"

namespace flowdepth {

enum class LossId { photometric, cgdc, dpc, bsca, smoothness };

std::string_view loss_name(LossId id);
/// Accepts the names returned by loss_name; throws InvalidArgumentError.
LossId parse_loss(std::string_view name);

/// Everything a loss reads. Depth is the contextual depth D^C, flow is the
/// optical-flow prior F^O and the pose is a twist.
struct LossInputs {
  CameraIntrinsics camera;
  TwistParams twist;
  DepthMap depth;
  FlowField flow;
  Image image_t;
  Image image_s;
  double alpha = kPhotometricAlpha;
  DifferentialOptions differential;
  /// Treat triangulated depth as a constant with respect to pose and flow.
  bool stop_gradient = false;
  /// |x| has subgradient 0 for |x| <= kink_tol times the term's normalizer
  /// (at least 1 for the dimensionless DPC residual).
  double kink_tol = 1e-9;
};

struct Targets {
  bool depth = true;
  bool twist = true;
  bool flow = false;
};

struct LossGradient {
  double value = 0.0;
  long valid_pixel_count = 0;
  ScalarField d_depth;
  Eigen::Matrix<double, 6, 1> d_twist = Eigen::Matrix<double, 6, 1>::Zero();
  std::optional<FlowField> d_flow;
};

/// The loss as the forward modules compute it.
LossValue evaluate_loss(LossId id, const LossInputs& inputs);

/// Exact derivative of evaluate_loss for the requested targets. Targets the
/// loss does not depend on come back as zeros. Pixel masks are held fixed.
LossGradient loss_gradient(LossId id, const LossInputs& inputs, const Targets& targets = {});

/// One compared coordinate.
struct GradCheckEntry {
  std::string coordinate;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  /// Set when the valid-pixel count changes under the perturbation or the
  /// one-sided slopes disagree (a kink); excluded entries do not count.
  bool excluded = false;
  std::string reason;
};

struct GradCheckReport {
  std::string loss;
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  long checked = 0;
  long excluded = 0;
  double tolerance = 1e-5;
  bool pass = false;

  std::vector<std::string> csv_header() const;
  std::vector<std::vector<std::string>> csv_rows() const;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  int sample_count = 64;
  std::uint64_t seed = 1;
  /// One-sided slopes further apart than this fraction flag a kink.
  double kink_ratio = 1e-2;
  /// Depth pixels are drawn from those with |gradient| above this fraction
  /// of the largest one. A loss value resolves to one ulp, so central
  /// differences cannot resolve much smaller components to 1e-5.
  double support_floor = 1e-3;
};

/// Value and valid-pixel count of an objective at a point.
struct Probe {
  double value = 0.0;
  long valid_count = 0;
};

/// Central-difference check of `analytic` against f at x0 on the listed
/// coordinates (index, label). Relative error is |a - fd| / max(|a|, |fd|, 1e-12).
GradCheckReport check_gradient(const std::function<Probe(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& analytic,
                               const std::vector<std::pair<Eigen::Index, std::string>>& coordinates,
                               const GradCheckOptions& options = {});

/// Checks loss_gradient on all six twist coordinates and sample_count
/// depth pixels drawn from the gradient's support (see support_floor).
GradCheckReport finite_difference_check(LossId id, const LossInputs& inputs, const GradCheckOptions& options = {});

}  // namespace flowdepth

namespace flowdepth {

/// A small random affine-inverse-shift scene prepared for gradient checks:
/// the epipole lies outside the image, the pose has a small random rotation,
/// the flow prior is the exact rigid flow and the depth is a smooth 5-15%
/// overestimate of the truth, so no absolute-value term sits at a kink.
LossInputs random_check_inputs(std::uint64_t seed, int height = 12, int width = 16);

}  // namespace flowdepth
