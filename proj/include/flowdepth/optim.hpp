#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowdepth/error.hpp"
#include "flowdepth/grad.hpp"
#include "flowdepth/losses.hpp"
#include "flowdepth/scene.hpp"

namespace flowdepth {

enum class DepthParameterization { log_depth, softplus };

std::string_view parameterization_name(DepthParameterization p);
DepthParameterization parse_parameterization(std::string_view name);

/// Starting depth field.
struct InitSpec {
  enum class Kind {
    ground_truth,
    /// depth_gt times an independent log-uniform factor in [low, high] per pixel.
    random_scale,
    /// A constant depth: `value` times the mean ground-truth depth.
    constant,
  };
  Kind kind = Kind::random_scale;
  double low = 0.5;
  double high = 2.0;
  double value = 1.0;
};

std::string_view init_name(InitSpec::Kind kind);
InitSpec::Kind parse_init(std::string_view name);

struct OptimConfig {
  LossWeights weights;
  /// Step per pixel: z -= learning_rate * (H W) * dL/dz, where z is the
  /// parameterized depth. Scaling by the pixel count undoes the mean.
  double learning_rate = 0.01;
  /// Flow step of co_adjust, in the same per-pixel units.
  double flow_learning_rate = 0.5;
  int iterations = 2000;
  DepthParameterization parameterization = DepthParameterization::log_depth;
  InitSpec init;
  bool stop_gradient = false;
  std::uint64_t seed = 1;
  /// Cap on |dz| per pixel and iteration (0 disables). Far from the
  /// solution |C^D| can approach zero and the DPC gradient is unbounded.
  double max_step = 0.02;
  /// Heavy-ball coefficient; 0 is plain gradient descent.
  double momentum = 0.0;
  int record_every = 10;
  double abort_loss = 1e6;
  double alpha = kPhotometricAlpha;
  DifferentialOptions differential;
};

/// Throws InvalidArgumentError for negative or all-zero weights, a
/// non-positive learning rate or a negative iteration budget.
void validate(const OptimConfig& config);

struct TraceRecord {
  int iteration = 0;
  double total = 0.0;
  double photometric = 0.0, cgdc = 0.0, dpc = 0.0, bsca = 0.0;
  DepthMetrics metrics;
  double static_abs_rel = 0.0;
  /// NaN without a dynamic object.
  double dynamic_abs_rel = 0.0;
  /// Mean |F^O - F^R|_1 on the dynamic patch, F^R from the current depth.
  double patch_flow_gap = 0.0;
  /// Mean |F^O - rigid flow of the true depth|_1 on the dynamic patch.
  double patch_flow_error = 0.0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  DepthMap final_depth;
  FlowField final_flow;
  bool aborted = false;
  /// Measured wall-clock time. Kept out of the CSV so reruns are byte-identical.
  double wall_seconds = 0.0;

  static std::vector<std::string> csv_header();
  std::vector<std::vector<std::string>> csv_rows() const;
};

class AbortedRunError : public Error {
 public:
  AbortedRunError(const std::string& what, RunTrace trace) : Error(what), trace_(std::move(trace)) {}
  const RunTrace& trace() const noexcept { return trace_; }

 private:
  RunTrace trace_;
};

/// The initial depth field a config produces for a bundle.
DepthMap initial_depth(const SceneBundle& bundle, const OptimConfig& config);

/// Gradient descent on w_p L_p + w_c L_c + w_d L_d + w_b L_b over the depth
/// field, with the true pose and the bundle's flow as the correspondence
/// prior. Records every record_every iterations and after the last one.
/// Throws AbortedRunError (carrying the trace) when the objective exceeds
/// abort_loss or stops being finite.
RunTrace recover_depth(const SceneBundle& bundle, const OptimConfig& config);

/// Joint run: a free flow field starting at bundle.flow_gt descends on L_b
/// alone, and the depth descends on w_p L_p + w_c L_c + w_d L_d computed from
/// the current flow. Requires w_b > 0.
RunTrace co_adjust(const SceneBundle& bundle, const OptimConfig& config);

/// The w_b = 0 control of co_adjust: the flow stays at bundle.flow_gt and
/// only the depth moves. Ignores config.weights.w_b.
RunTrace co_adjust_control(const SceneBundle& bundle, const OptimConfig& config);

struct AblationScene {
  std::string name;
  SceneBundle bundle;
};

struct AblationConfig {
  std::string name;
  OptimConfig config;
};

/// One row per (scene, config) pair in scene-major order with the final
/// metrics; a failing run becomes a row with status "error" and its message.
std::vector<std::string> ablation_header();
std::vector<std::vector<std::string>> ablation_suite(const std::vector<AblationScene>& scenes,
                                                     const std::vector<AblationConfig>& configs);

}  // namespace flowdepth
