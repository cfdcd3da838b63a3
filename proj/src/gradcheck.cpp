#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <string>

#include "flowdepth/grad.hpp"

namespace flowdepth {

namespace {

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<std::string> GradCheckReport::csv_header() const {
  return {"loss", "coordinate", "analytic", "numeric", "rel_error", "excluded", "reason"};
}

std::vector<std::vector<std::string>> GradCheckReport::csv_rows() const {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries)
    rows.push_back({loss, e.coordinate, format_double(e.analytic), format_double(e.numeric),
                    format_double(e.rel_error), e.excluded ? "1" : "0", e.reason});
  return rows;
}

GradCheckReport check_gradient(const std::function<Probe(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& analytic,
                               const std::vector<std::pair<Eigen::Index, std::string>>& coordinates,
                               const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgumentError("gradient check step must be positive");
  GradCheckReport report;
  report.tolerance = options.tolerance;
  const Probe base = f(x0);
  Eigen::VectorXd x = x0;
  for (const auto& [index, label] : coordinates) {
    GradCheckEntry e;
    e.coordinate = label;
    e.analytic = analytic[index];
    const double h = options.step;
    x[index] = x0[index] + h;
    const Probe plus = f(x);
    x[index] = x0[index] - h;
    const Probe minus = f(x);
    x[index] = x0[index];
    e.numeric = (plus.value - minus.value) / (2.0 * h);
    e.rel_error = std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-12});
    if (plus.valid_count != base.valid_count || minus.valid_count != base.valid_count) {
      e.excluded = true;
      e.reason = "mask-change";
    } else {
      const double right = (plus.value - base.value) / h;
      const double left = (base.value - minus.value) / h;
      const double gap = std::abs(right - left);
      if (gap > options.kink_ratio * std::max(std::abs(right), std::abs(left)) && gap > 1e-9) {
        e.excluded = true;
        e.reason = "kink";
      }
    }
    if (e.excluded) {
      ++report.excluded;
    } else {
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    }
    report.entries.push_back(std::move(e));
  }
  report.pass = report.checked > 0 && report.max_rel_error < options.tolerance;
  return report;
}

GradCheckReport finite_difference_check(LossId id, const LossInputs& inputs, const GradCheckOptions& options) {
  const LossGradient analytic = loss_gradient(id, inputs, Targets{true, true, false});
  const int w = inputs.depth.width();
  const Eigen::Index plane = static_cast<Eigen::Index>(inputs.depth.size());

  Eigen::VectorXd x0(6 + plane), grad(6 + plane);
  x0.head<6>() = inputs.twist.values;
  grad.head<6>() = analytic.d_twist;
  for (Eigen::Index i = 0; i < plane; ++i) {
    x0[6 + i] = inputs.depth.data()[i];
    grad[6 + i] = analytic.d_depth.data()[i];
  }

  static const char* const twist_names[6] = {"twist.wx", "twist.wy", "twist.wz", "twist.tx", "twist.ty", "twist.tz"};
  std::vector<std::pair<Eigen::Index, std::string>> coords;
  for (int i = 0; i < 6; ++i) coords.emplace_back(i, twist_names[i]);

  // Depth pixels from the gradient's support, falling back to all pixels.
  double largest = 0.0;
  for (double g : analytic.d_depth.values()) largest = std::max(largest, std::abs(g));
  std::vector<Eigen::Index> pool;
  for (Eigen::Index i = 0; i < plane; ++i)
    if (std::abs(analytic.d_depth.data()[i]) > options.support_floor * largest) pool.push_back(i);
  if (static_cast<int>(pool.size()) < options.sample_count) {
    pool.clear();
    for (Eigen::Index i = 0; i < plane; ++i) pool.push_back(i);
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(options.sample_count, 0))));
  std::sort(pool.begin(), pool.end());
  for (Eigen::Index i : pool)
    coords.emplace_back(6 + i, "depth(" + std::to_string(i % w) + "," + std::to_string(i / w) + ")");

  LossInputs probe_inputs = inputs;
  auto f = [&](const Eigen::VectorXd& x) {
    probe_inputs.twist.values = x.head<6>();
    for (Eigen::Index i = 0; i < plane; ++i) probe_inputs.depth.data()[i] = x[6 + i];
    try {
      const LossValue v = evaluate_loss(id, probe_inputs);
      return Probe{v.value, v.valid_pixel_count};
    } catch (const NoValidPixelsError&) {
      return Probe{0.0, 0};
    }
  };
  GradCheckReport report = check_gradient(f, x0, grad, coords, options);
  report.loss = std::string(loss_name(id));
  return report;
}

}  // namespace flowdepth

#include "flowdepth/scene.hpp"

namespace flowdepth {

LossInputs random_check_inputs(std::uint64_t seed, int height, int width) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double deg = 3.14159265358979323846 / 180.0;
  const Eigen::Vector3d omega(uniform(-3, 3) * deg, uniform(-3, 3) * deg, uniform(-3, 3) * deg);
  const Eigen::Vector3d t(uniform(0.3, 0.6), uniform(0.2, 0.4), uniform(0.08, 0.15));
  const CameraIntrinsics camera(1.25 * width, 1.25 * width, width / 2.0, height / 2.0);
  SceneSpec spec;
  spec.a = uniform(0.18, 0.25);
  spec.b = uniform(0.6, 1.0) / (10.0 * width);
  spec.c = uniform(0.6, 1.0) / (10.0 * width);
  const RigidMotion motion = RigidMotion::from_axis_angle(omega, t);
  const SceneBundle bundle = synthesize(spec, camera, motion, height, width);

  LossInputs in;
  in.camera = camera;
  in.twist = TwistParams::from_motion(motion);
  in.flow = bundle.flow_gt;
  in.image_t = bundle.image_t;
  in.image_s = bundle.image_s;
  in.depth = bundle.depth_gt;
  const double phase = uniform(0.0, 6.283);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) in.depth(u, v) *= 1.1 + 0.04 * std::sin(phase + 0.37 * u + 0.23 * v);
  return in;
}

}  // namespace flowdepth
