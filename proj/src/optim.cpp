#include "flowdepth/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "flowdepth/io.hpp"

namespace flowdepth {

std::string_view parameterization_name(DepthParameterization p) {
  return p == DepthParameterization::log_depth ? "log-depth" : "softplus";
}

DepthParameterization parse_parameterization(std::string_view name) {
  if (name == "log-depth") return DepthParameterization::log_depth;
  if (name == "softplus") return DepthParameterization::softplus;
  throw InvalidArgumentError("unknown depth parameterization: " + std::string(name));
}

std::string_view init_name(InitSpec::Kind kind) {
  switch (kind) {
    case InitSpec::Kind::ground_truth:
      return "ground-truth";
    case InitSpec::Kind::random_scale:
      return "random-scale";
    case InitSpec::Kind::constant:
      return "constant";
  }
  return "unknown";
}

InitSpec::Kind parse_init(std::string_view name) {
  for (auto k : {InitSpec::Kind::ground_truth, InitSpec::Kind::random_scale, InitSpec::Kind::constant})
    if (init_name(k) == name) return k;
  throw InvalidArgumentError("unknown init kind: " + std::string(name));
}

void validate(const OptimConfig& c) {
  const auto& w = c.weights;
  for (double x : {w.w_p, w.w_c, w.w_d, w.w_b})
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgumentError("loss weights must be finite and non-negative");
  if (w.all_zero()) throw InvalidArgumentError("all loss weights are zero; the objective is empty");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
    throw InvalidArgumentError("learning rate must be positive");
  if (!(c.flow_learning_rate > 0.0)) throw InvalidArgumentError("flow learning rate must be positive");
  if (c.iterations < 0) throw InvalidArgumentError("iteration budget must be non-negative");
  if (!(c.max_step >= 0.0)) throw InvalidArgumentError("max_step must be non-negative");
  if (c.record_every < 1) throw InvalidArgumentError("record_every must be at least 1");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw InvalidArgumentError("momentum must lie in [0, 1)");
  if (c.init.kind == InitSpec::Kind::random_scale && !(c.init.low > 0.0 && c.init.low <= c.init.high))
    throw InvalidArgumentError("random init needs 0 < low <= high");
  if (c.init.kind == InitSpec::Kind::constant && !(c.init.value > 0.0))
    throw InvalidArgumentError("constant init needs a positive value");
}

std::vector<std::string> RunTrace::csv_header() {
  return {"iteration",  "total",   "photometric", "cgdc",   "dpc",    "bsca",           "abs_rel",
          "sq_rel",     "rmse",    "rmse_log",    "delta1", "delta2", "delta3",         "static_abs_rel",
          "dynamic_abs_rel", "patch_flow_gap", "patch_flow_error"};
}

std::vector<std::vector<std::string>> RunTrace::csv_rows() const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : records)
    rows.push_back({std::to_string(r.iteration), format_number(r.total), format_number(r.photometric),
                    format_number(r.cgdc), format_number(r.dpc), format_number(r.bsca),
                    format_number(r.metrics.abs_rel), format_number(r.metrics.sq_rel), format_number(r.metrics.rmse),
                    format_number(r.metrics.rmse_log), format_number(r.metrics.delta1),
                    format_number(r.metrics.delta2), format_number(r.metrics.delta3), format_number(r.static_abs_rel),
                    format_number(r.dynamic_abs_rel), format_number(r.patch_flow_gap),
                    format_number(r.patch_flow_error)});
  return rows;
}

DepthMap initial_depth(const SceneBundle& bundle, const OptimConfig& config) {
  const DepthMap& gt = bundle.depth_gt;
  DepthMap d = gt;
  switch (config.init.kind) {
    case InitSpec::Kind::ground_truth:
      break;
    case InitSpec::Kind::random_scale: {
      std::mt19937_64 rng(config.seed);
      std::uniform_real_distribution<double> dist(std::log(config.init.low), std::log(config.init.high));
      for (double& x : d.values()) x *= std::exp(dist(rng));
      break;
    }
    case InitSpec::Kind::constant: {
      double mean = 0.0;
      for (double x : gt.values()) mean += x;
      d.fill(config.init.value * mean / static_cast<double>(gt.size()));
      break;
    }
  }
  return d;
}

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double softplus_inverse(double d) { return d > 30.0 ? d : std::log(std::expm1(d)); }

class Parameterized {
 public:
  Parameterized(DepthParameterization kind, const DepthMap& depth) : kind_(kind), z_(depth) {
    for (double& x : z_.values())
      x = kind_ == DepthParameterization::log_depth ? std::log(x) : softplus_inverse(x);
  }

  DepthMap depth() const {
    DepthMap d = z_;
    for (double& x : d.values()) x = kind_ == DepthParameterization::log_depth ? std::exp(x) : softplus(x);
    return d;
  }

  /// dL/dz from dL/dD at the current depth.
  void chain(const DepthMap& depth, ScalarField& grad) const {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double dd_dz = kind_ == DepthParameterization::log_depth ? depth.data()[i]
                                                                      : 1.0 / (1.0 + std::exp(-z_.data()[i]));
      grad.data()[i] *= dd_dz;
    }
  }

  Grid<double>& z() { return z_; }

 private:
  DepthParameterization kind_;
  Grid<double> z_;
};

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double safe_loss(LossId id, const LossInputs& in) {
  try {
    return evaluate_loss(id, in).value;
  } catch (const NoValidPixelsError&) {
    return nan();
  }
}

double masked_abs_rel(const DepthMap& pred, const DepthMap& gt, const Mask& mask) {
  if (count_true(mask) == 0) return nan();
  return depth_metrics(pred, gt, mask).abs_rel;
}

/// Mean |a - b|_1 over the mask.
double patch_gap(const FlowField& a, const FlowField& b, const Mask& mask) {
  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.data()[i]) continue;
    sum += std::abs(a.u.data()[i] - b.u.data()[i]) + std::abs(a.v.data()[i] - b.v.data()[i]);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : nan();
}

struct Runner {
  const SceneBundle& bundle;
  const OptimConfig& config;
  bool co_adjusting;

  RunTrace run() {
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    const int h = bundle.depth_gt.height(), w = bundle.depth_gt.width();
    const double n = static_cast<double>(h) * static_cast<double>(w);
    const Mask all(h, w, 1);
    Mask static_mask(h, w, 0);
    for (std::size_t i = 0; i < static_mask.size(); ++i) static_mask.data()[i] = bundle.dynamic_mask.data()[i] ? 0 : 1;
    const FlowField rigid_gt = rigid_flow(bundle.camera, bundle.motion, bundle.depth_gt);

    LossInputs in;
    in.camera = bundle.camera;
    in.twist = TwistParams::from_motion(bundle.motion);
    in.flow = bundle.flow_gt;
    in.image_t = bundle.image_t;
    in.image_s = bundle.image_s;
    in.alpha = config.alpha;
    in.differential = config.differential;
    in.stop_gradient = config.stop_gradient;

    Parameterized param(config.parameterization, initial_depth(bundle, config));
    Grid<double> velocity(h, w, 0.0);
    const auto& wt = config.weights;
    struct Term {
      LossId id;
      double weight;
    };
    std::vector<Term> depth_terms;
    if (wt.w_p > 0.0) depth_terms.push_back({LossId::photometric, wt.w_p});
    if (wt.w_c > 0.0) depth_terms.push_back({LossId::cgdc, wt.w_c});
    if (wt.w_d > 0.0) depth_terms.push_back({LossId::dpc, wt.w_d});
    if (wt.w_b > 0.0 && !co_adjusting) depth_terms.push_back({LossId::bsca, wt.w_b});

    RunTrace trace;
    const Targets depth_only{true, false, false};
    for (int it = 0;; ++it) {
      in.depth = param.depth();
      bool positive = true;
      for (double x : in.depth.values()) positive = positive && x > 0.0 && std::isfinite(x);
      ScalarField grad(h, w, 0.0);
      double total = positive ? 0.0 : nan();
      for (const auto& term : depth_terms) {
        if (!positive) break;
        const LossGradient g = loss_gradient(term.id, in, depth_only);
        total += term.weight * g.value;
        for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] += term.weight * g.d_depth.data()[i];
      }
      std::optional<LossGradient> flow_grad;
      if (co_adjusting && positive && wt.w_b > 0.0) {
        flow_grad = loss_gradient(LossId::bsca, in, Targets{false, false, true});
        total += wt.w_b * flow_grad->value;
      }

      const bool last = it == config.iterations;
      const bool bad = !std::isfinite(total) || total > config.abort_loss;
      if (it % config.record_every == 0 || last || bad) {
        TraceRecord r;
        r.iteration = it;
        r.total = total;
        r.photometric = positive ? safe_loss(LossId::photometric, in) : nan();
        r.cgdc = positive ? safe_loss(LossId::cgdc, in) : nan();
        r.dpc = positive ? safe_loss(LossId::dpc, in) : nan();
        r.bsca = positive ? safe_loss(LossId::bsca, in) : nan();
        if (positive) {
          r.metrics = depth_metrics(in.depth, bundle.depth_gt, all);
          r.static_abs_rel = masked_abs_rel(in.depth, bundle.depth_gt, static_mask);
          r.dynamic_abs_rel = masked_abs_rel(in.depth, bundle.depth_gt, bundle.dynamic_mask);
        } else {
          r.metrics.abs_rel = r.static_abs_rel = r.dynamic_abs_rel = nan();
        }
        const FlowField rigid_now = rigid_flow(bundle.camera, bundle.motion, in.depth);
        r.patch_flow_gap = patch_gap(in.flow, rigid_now, bundle.dynamic_mask);
        r.patch_flow_error = patch_gap(in.flow, rigid_gt, bundle.dynamic_mask);
        trace.records.push_back(r);
      }
      if (bad) {
        trace.aborted = true;
        trace.final_depth = in.depth;
        trace.final_flow = in.flow;
        trace.wall_seconds = seconds_since(start);
        throw AbortedRunError("objective diverged at iteration " + std::to_string(it) + " (loss " +
                                  format_number(total) + ")",
                              std::move(trace));
      }
      if (last) break;

      param.chain(in.depth, grad);
      auto& z = param.z();
      for (std::size_t i = 0; i < z.size(); ++i) {
        velocity.data()[i] = config.momentum * velocity.data()[i] + grad.data()[i];
        double step = config.learning_rate * n * velocity.data()[i];
        if (config.max_step > 0.0) step = std::clamp(step, -config.max_step, config.max_step);
        z.data()[i] -= step;
      }
      if (flow_grad) {
        // A step that would carry a component past F^R stops on it: the L1
        // kink is the minimizer, and a fixed step would chatter around it.
        const double rate = config.flow_learning_rate * n * wt.w_b;
        const FlowField target = rigid_flow(bundle.camera, bundle.motion, in.depth);
        auto update = [rate](double& f, double grad, double to) {
          const double step = -rate * grad;
          const double gap = to - f;
          f = (step * gap > 0.0 && std::abs(step) >= std::abs(gap)) ? to : f + step;
        };
        for (std::size_t i = 0; i < in.flow.u.size(); ++i) {
          update(in.flow.u.data()[i], flow_grad->d_flow->u.data()[i], target.u.data()[i]);
          update(in.flow.v.data()[i], flow_grad->d_flow->v.data()[i], target.v.data()[i]);
        }
      }
    }
    trace.final_depth = in.depth;
    trace.final_flow = in.flow;
    trace.wall_seconds = seconds_since(start);
    return trace;
  }

  static double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace

RunTrace recover_depth(const SceneBundle& bundle, const OptimConfig& config) {
  if (bundle.motion.translation().norm() == 0.0) throw InvalidArgumentError("recover_depth needs a non-zero translation");
  if (count_true(bundle.dynamic_mask) > 0 && config.weights.w_b <= 0.0)
    throw InvalidArgumentError("recover_depth on a scene with a dynamic object needs w_b > 0");
  return Runner{bundle, config, false}.run();
}

RunTrace co_adjust(const SceneBundle& bundle, const OptimConfig& config) {
  if (!(config.weights.w_b > 0.0)) throw InvalidArgumentError("co_adjust needs w_b > 0");
  if (bundle.motion.translation().norm() == 0.0) throw InvalidArgumentError("co_adjust needs a non-zero translation");
  return Runner{bundle, config, true}.run();
}

RunTrace co_adjust_control(const SceneBundle& bundle, const OptimConfig& config) {
  if (bundle.motion.translation().norm() == 0.0) throw InvalidArgumentError("co_adjust needs a non-zero translation");
  OptimConfig frozen = config;
  frozen.weights.w_b = 0.0;
  return Runner{bundle, frozen, true}.run();
}

std::vector<std::string> ablation_header() {
  return {"scene", "config", "w_p",     "w_c",    "w_d",    "w_b",    "iterations", "status",
          "loss",  "abs_rel", "sq_rel", "rmse",   "rmse_log", "delta1", "message"};
}

std::vector<std::vector<std::string>> ablation_suite(const std::vector<AblationScene>& scenes,
                                                     const std::vector<AblationConfig>& configs) {
  if (scenes.empty() || configs.empty()) throw InvalidArgumentError("ablation grid is empty");
  std::vector<std::vector<std::string>> rows;
  for (const auto& scene : scenes)
    for (const auto& cfg : configs) {
      const auto& w = cfg.config.weights;
      std::vector<std::string> row{scene.name,
                                   cfg.name,
                                   format_number(w.w_p),
                                   format_number(w.w_c),
                                   format_number(w.w_d),
                                   format_number(w.w_b),
                                   std::to_string(cfg.config.iterations)};
      auto finish = [&](const std::string& status, const TraceRecord* r, const std::string& message) {
        row.push_back(status);
        for (double x : {r ? r->total : nan(), r ? r->metrics.abs_rel : nan(), r ? r->metrics.sq_rel : nan(),
                         r ? r->metrics.rmse : nan(), r ? r->metrics.rmse_log : nan(), r ? r->metrics.delta1 : nan()})
          row.push_back(format_number(x));
        row.push_back(message);
      };
      try {
        const bool dynamic = count_true(scene.bundle.dynamic_mask) > 0 && w.w_b > 0.0;
        const RunTrace trace = dynamic ? co_adjust(scene.bundle, cfg.config) : recover_depth(scene.bundle, cfg.config);
        finish("ok", &trace.records.back(), "");
      } catch (const AbortedRunError& e) {
        finish("aborted", e.trace().records.empty() ? nullptr : &e.trace().records.back(), e.what());
      } catch (const Error& e) {
        finish("error", nullptr, e.what());
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

}  // namespace flowdepth
