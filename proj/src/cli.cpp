#include "flowdepth/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flowdepth/grad.hpp"
#include "flowdepth/io.hpp"
#include "flowdepth/losses.hpp"
#include "flowdepth/optim.hpp"
#include "flowdepth/parallel.hpp"
#include "flowdepth/scene.hpp"
#include "flowdepth/triangulate.hpp"

namespace flowdepth::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string scene;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::string size;
  std::string weights;
  int iters = -1;
  std::string stopgrad = "off";
  double lr = 0.0;
  double flow_lr = 0.0;
  std::string init = "random-scale";
  std::string param = "log-depth";
  std::string pred;
  std::string gt;
  std::string flow;
};

std::optional<std::pair<int, int>> parse_size(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto x = text.find('x');
  if (x == std::string::npos) throw UsageError("--size must look like HxW, got '" + text + "'");
  int h = 0, w = 0;
  const char* s = text.data();
  const auto r1 = std::from_chars(s, s + x, h);
  const auto r2 = std::from_chars(s + x + 1, s + text.size(), w);
  if (r1.ec != std::errc{} || r1.ptr != s + x || r2.ec != std::errc{} || r2.ptr != s + text.size() || h < 3 || w < 3)
    throw UsageError("--size must look like HxW with both sides >= 3, got '" + text + "'");
  return std::make_pair(h, w);
}

LossWeights parse_weights(const std::string& text, const LossWeights& fallback) {
  if (text.empty()) return fallback;
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double x = 0.0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), x);
    if (r.ec != std::errc{} || r.ptr != item.data() + item.size() || !std::isfinite(x) || x < 0.0)
      throw UsageError("--weights needs four non-negative numbers w_p,w_c,w_d,w_b");
    v.push_back(x);
  }
  if (v.size() != 4) throw UsageError("--weights needs four non-negative numbers w_p,w_c,w_d,w_b");
  LossWeights w{v[0], v[1], v[2], v[3]};
  if (w.all_zero()) throw UsageError("--weights are all zero; the objective is empty");
  return w;
}

bool parse_switch(const std::string& text) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw UsageError("--stopgrad must be on or off");
}

class Session {
 public:
  Session(const Flags& flags, std::string command, std::ostream& out)
      : flags_(flags), command_(std::move(command)), out_(out) {
    size_ = parse_size(flags.size);
  }

  void open_output() {
    fs::create_directories(flags_.out);
    note("command", command_);
    note("out", flags_.out);
    note("seed", std::to_string(flags_.seed));
  }

  SceneFile scene() {
    SceneFile f = flags_.scene.empty() ? parse_scene("", size_) : load_scene(flags_.scene, size_);
    note("scene_source", flags_.scene.empty() ? std::string("<default>") : flags_.scene);
    write_text_artifact("scene.txt", format_scene(f));
    return f;
  }

  std::string path(const std::string& name) const { return (fs::path(flags_.out) / name).string(); }

  void announce(const std::string& p) { out_ << "wrote " << p << '\n'; }

  void write_text_artifact(const std::string& name, const std::string& text) {
    write_text(path(name), text);
    announce(path(name));
  }
  void write_csv_artifact(const std::string& name, const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
    write_csv(path(name), header, rows);
    announce(path(name));
  }
  void write_depth_artifact(const std::string& name, const DepthMap& d) {
    write_depth_pfm(path(name), d);
    announce(path(name));
  }
  void write_flow_artifact(const std::string& name, const FlowField& f) {
    write_flow(path(name), f);
    announce(path(name));
  }
  void write_image_artifact(const std::string& name, const Image& img) {
    write_image_pnm(path(name), img);
    announce(path(name));
  }

  void note(const std::string& key, const std::string& value) { manifest_.emplace_back(key, value); }

  void finish() {
    std::string text;
    for (const auto& [k, v] : manifest_) text += k + "=" + v + "\n";
    write_text_artifact("manifest.txt", text);
  }

  const Flags& flags() const { return flags_; }

 private:
  const Flags& flags_;
  std::string command_;
  std::ostream& out_;
  std::optional<std::pair<int, int>> size_;
  std::vector<std::pair<std::string, std::string>> manifest_;
};

void note_weights(Session& s, const LossWeights& w) {
  s.note("w_p", format_number(w.w_p));
  s.note("w_c", format_number(w.w_c));
  s.note("w_d", format_number(w.w_d));
  s.note("w_b", format_number(w.w_b));
}

OptimConfig optim_config(Session& s, const LossWeights& fallback) {
  const Flags& f = s.flags();
  OptimConfig c;
  c.weights = parse_weights(f.weights, fallback);
  if (f.iters >= 0) c.iterations = f.iters;
  if (f.lr > 0.0) c.learning_rate = f.lr;
  if (f.flow_lr > 0.0) c.flow_learning_rate = f.flow_lr;
  c.stop_gradient = parse_switch(f.stopgrad);
  c.seed = f.seed;
  try {
    c.init.kind = parse_init(f.init);
    c.parameterization = parse_parameterization(f.param);
    validate(c);
  } catch (const InvalidArgumentError& e) {
    throw UsageError(e.what());
  }
  note_weights(s, c.weights);
  s.note("iterations", std::to_string(c.iterations));
  s.note("learning_rate", format_number(c.learning_rate));
  s.note("flow_learning_rate", format_number(c.flow_learning_rate));
  s.note("parameterization", std::string(parameterization_name(c.parameterization)));
  s.note("init", std::string(init_name(c.init.kind)));
  s.note("init_low", format_number(c.init.low));
  s.note("init_high", format_number(c.init.high));
  s.note("init_value", format_number(c.init.value));
  s.note("stopgrad", c.stop_gradient ? "on" : "off");
  s.note("max_step", format_number(c.max_step));
  s.note("momentum", format_number(c.momentum));
  s.note("record_every", std::to_string(c.record_every));
  s.note("abort_loss", format_number(c.abort_loss));
  s.note("alpha", format_number(c.alpha));
  return c;
}

void gen_scene(Session& s) {
  s.open_output();
  const SceneFile f = s.scene();
  const SceneBundle b = f.synthesize();
  s.write_depth_artifact("depth.pfm", b.depth_gt);
  s.write_flow_artifact("flow.flo", b.flow_gt);
  s.write_image_artifact("image_t.pnm", b.image_t);
  s.write_image_artifact("image_s.pnm", b.image_s);
  s.finish();
}

void triangulate_cmd(Session& s) {
  s.open_output();
  const SceneFile f = s.scene();
  const SceneBundle b = f.synthesize();
  const FlowField flow = s.flags().flow.empty() ? b.flow_gt : read_flow(s.flags().flow);
  s.note("flow_source", s.flags().flow.empty() ? std::string("<scene>") : s.flags().flow);
  s.note("eps_denominator", format_number(kEpsDenominator));
  const TriangulationResult r = triangulate_depth(b.camera, b.motion, flow);
  long counts[4] = {0, 0, 0, 0};
  double max_rel = 0.0;
  for (int v = 0; v < r.depth_g.height(); ++v)
    for (int u = 0; u < r.depth_g.width(); ++u) {
      ++counts[r.code(u, v)];
      if (r.valid(u, v) && !b.dynamic_mask(u, v))
        max_rel = std::max(max_rel, std::abs(r.depth_g(u, v) - b.depth_gt(u, v)) / b.depth_gt(u, v));
    }
  s.write_depth_artifact("depth_g.pfm", r.depth_g);
  s.write_csv_artifact("triangulation.csv",
                       {"valid", "near_zero_denominator", "negative_depth", "masked_flow", "max_rel_error_static"},
                       {{std::to_string(counts[0]), std::to_string(counts[1]), std::to_string(counts[2]),
                         std::to_string(counts[3]), format_number(max_rel)}});
  s.finish();
}

void check_dpc(Session& s) {
  s.open_output();
  const SceneFile f = s.scene();
  const SceneBundle b = f.synthesize();
  std::vector<std::vector<std::string>> rows;
  for (auto stencil : {GradientStencil::inverse_depth, GradientStencil::depth}) {
    DifferentialOptions opt;
    opt.stencil = stencil;
    const FlowField tra = translational_flow(
        b.flow_gt, rotational_flow(b.camera, b.motion.rotation(), b.depth_gt.height(), b.depth_gt.width()));
    const DifferentialFields d = differential_fields(b.camera, b.motion, b.depth_gt, tra, opt);
    double max_diff = 0.0;
    long count = 0;
    for (int v = 0; v < d.valid.height(); ++v)
      for (int u = 0; u < d.valid.width(); ++u)
        if (d.valid(u, v)) {
          max_diff = std::max(max_diff, std::abs(d.c_f(u, v) - d.c_d(u, v)));
          ++count;
        }
    LossInputs in;
    in.camera = b.camera;
    in.twist = TwistParams::from_motion(b.motion);
    in.depth = b.depth_gt;
    in.flow = b.flow_gt;
    in.differential = opt;
    const double loss = count > 0 ? evaluate_loss(LossId::dpc, in).value : std::nan("");
    rows.push_back({stencil == GradientStencil::inverse_depth ? "inverse-depth" : "depth", std::to_string(count),
                    format_number(max_diff), format_number(loss)});
  }
  s.write_csv_artifact("dpc.csv", {"stencil", "valid_pixels", "max_abs_cf_minus_cd", "dpc_loss"}, rows);
  s.finish();
}

void grad_check(Session& s) {
  s.open_output();
  const auto size = parse_size(s.flags().size).value_or(std::make_pair(12, 16));
  s.note("height", std::to_string(size.first));
  s.note("width", std::to_string(size.second));
  const LossInputs in = random_check_inputs(s.flags().seed, size.first, size.second);
  GradCheckOptions opt;
  opt.seed = s.flags().seed;
  s.note("step", format_number(opt.step));
  s.note("tolerance", format_number(opt.tolerance));
  s.note("sample_count", std::to_string(opt.sample_count));
  s.note("kink_ratio", format_number(opt.kink_ratio));
  s.note("support_floor", format_number(opt.support_floor));
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> summary;
  bool all_pass = true;
  for (auto id : {LossId::photometric, LossId::cgdc, LossId::dpc, LossId::bsca, LossId::smoothness}) {
    const GradCheckReport r = finite_difference_check(id, in, opt);
    header = r.csv_header();
    for (auto& row : r.csv_rows()) rows.push_back(std::move(row));
    summary.push_back({r.loss, std::to_string(r.checked), std::to_string(r.excluded), format_number(r.max_rel_error),
                       r.pass ? "pass" : "fail"});
    all_pass = all_pass && r.pass;
  }
  s.write_csv_artifact("gradcheck.csv", header, rows);
  s.write_csv_artifact("gradcheck_summary.csv", {"loss", "checked", "excluded", "max_rel_error", "status"}, summary);
  s.finish();
  if (!all_pass) throw Error("gradient check failed; see gradcheck_summary.csv");
}

void write_trace(Session& s, const RunTrace& trace, bool with_flow) {
  s.write_csv_artifact("trace.csv", RunTrace::csv_header(), trace.csv_rows());
  s.write_depth_artifact("depth.pfm", trace.final_depth);
  if (with_flow) s.write_flow_artifact("flow.flo", trace.final_flow);
}

template <class Fn>
void optimize(Session& s, const LossWeights& fallback, bool with_flow, Fn&& fn) {
  s.open_output();
  const SceneFile f = s.scene();
  const OptimConfig c = optim_config(s, fallback);
  const SceneBundle b = f.synthesize();
  try {
    write_trace(s, fn(b, c), with_flow);
  } catch (const AbortedRunError& e) {
    write_trace(s, e.trace(), with_flow);
    s.note("status", "aborted");
    s.finish();
    throw;
  }
  s.note("status", "ok");
  s.finish();
}

void ablate(Session& s) {
  s.open_output();
  const SceneFile f = s.scene();
  const OptimConfig base = optim_config(s, LossWeights{});
  SceneFile flat = f;
  flat.spec.texture.amplitude = {0.0, 0.0, 0.0};
  std::vector<AblationScene> scenes{{"textured", f.synthesize()}, {"texture-free", flat.synthesize()}};
  const bool dynamic = count_true(scenes[0].bundle.dynamic_mask) > 0;
  const double wb = dynamic ? std::max(base.weights.w_b, 1.0) : 0.0;
  std::vector<AblationConfig> configs;
  for (double wc : {0.0, 1.0})
    for (double wd : {0.0, base.weights.w_d}) {
      OptimConfig c = base;
      c.weights = {wc == 0.0 && wd == 0.0 ? 1.0 : 0.0, wc, wd, wb};
      configs.push_back({"w_c=" + format_number(wc) + ";w_d=" + format_number(wd), c});
    }
  s.write_csv_artifact("ablation.csv", ablation_header(), ablation_suite(scenes, configs));
  s.finish();
}

void metrics_cmd(Session& s) {
  s.open_output();
  if (s.flags().pred.empty()) throw UsageError("metrics needs --pred <depth.pfm>");
  const DepthMap pred = read_depth_pfm(s.flags().pred);
  DepthMap gt;
  if (!s.flags().gt.empty()) {
    gt = read_depth_pfm(s.flags().gt);
    s.note("gt_source", s.flags().gt);
  } else {
    gt = s.scene().synthesize().depth_gt;
  }
  s.note("pred_source", s.flags().pred);
  if (!pred.same_shape(gt)) throw DimensionError("--pred and the ground truth differ in shape");
  Mask mask(gt.height(), gt.width(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = gt.data()[i] > 0.0 ? 1 : 0;
  const DepthMetrics m = depth_metrics(pred, gt, mask);
  s.write_csv_artifact("metrics.csv",
                       {"abs_rel", "sq_rel", "rmse", "rmse_log", "log10", "delta1", "delta2", "delta3", "count"},
                       {{format_number(m.abs_rel), format_number(m.sq_rel), format_number(m.rmse),
                         format_number(m.rmse_log), format_number(m.log10), format_number(m.delta1),
                         format_number(m.delta2), format_number(m.delta3), std::to_string(m.count)}});
  s.finish();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Triangulated-depth and flow-consistency toolkit on synthetic scenes", "flowdepth"};
  app.require_subcommand(1);
  Flags flags;

  struct Entry {
    CLI::App* app;
    std::string name;
  };
  std::vector<Entry> commands;
  auto add = [&](const std::string& name, const std::string& help, bool optim) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--scene", flags.scene, "Scene description file (key=value)");
    sub->add_option("--out", flags.out, "Output directory, created if absent");
    sub->add_option("--seed", flags.seed, "Random seed");
    sub->add_option("--size", flags.size, "Image size HxW, overriding the scene");
    if (optim) {
      sub->add_option("--weights", flags.weights, "w_p,w_c,w_d,w_b");
      sub->add_option("--iters", flags.iters, "Iteration budget")->check(CLI::NonNegativeNumber);
      sub->add_option("--stopgrad", flags.stopgrad, "Stop-gradient through triangulated depth: on|off");
      sub->add_option("--lr", flags.lr, "Depth learning rate")->check(CLI::PositiveNumber);
      sub->add_option("--flow-lr", flags.flow_lr, "Flow learning rate of co-adjust")->check(CLI::PositiveNumber);
      sub->add_option("--init", flags.init, "ground-truth|random-scale|constant");
      sub->add_option("--param", flags.param, "log-depth|softplus");
    }
    commands.push_back({sub, name});
    return sub;
  };
  add("gen-scene", "Synthesize a scene and write depth, flow and both images", false);
  add("triangulate", "Triangulate depth from the scene flow (or --flow)", false)
      ->add_option("--flow", flags.flow, ".flo file to triangulate instead of the scene flow");
  add("check-dpc", "Compare the flow-divergence and depth-gradient fields", false);
  add("grad-check", "Finite-difference check of every loss gradient on a random scene", false);
  add("recover-depth", "Recover depth by gradient descent on the weighted losses", true);
  add("co-adjust", "Jointly adjust a free flow field and the depth", true);
  add("ablate", "Run a weight grid on the textured and texture-free scene", true);
  CLI::App* metrics = add("metrics", "Depth metrics of a predicted depth map", false);
  metrics->add_option("--pred", flags.pred, "Predicted depth (.pfm)");
  metrics->add_option("--gt", flags.gt, "Ground-truth depth (.pfm); defaults to the scene depth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "flowdepth: " << e.what() << '\n';
    return 2;
  }

  std::string name;
  for (const auto& c : commands)
    if (c.app->parsed()) name = c.name;

  try {
    Session s(flags, name, out);
    if (name == "gen-scene") gen_scene(s);
    else if (name == "triangulate") triangulate_cmd(s);
    else if (name == "check-dpc") check_dpc(s);
    else if (name == "grad-check") grad_check(s);
    else if (name == "recover-depth")
      optimize(s, LossWeights{}, false, [](const SceneBundle& b, const OptimConfig& c) { return recover_depth(b, c); });
    else if (name == "co-adjust") {
      LossWeights fallback;
      fallback.w_b = 1.0;
      optimize(s, fallback, true, [](const SceneBundle& b, const OptimConfig& c) { return co_adjust(b, c); });
    } else if (name == "ablate") ablate(s);
    else if (name == "metrics") metrics_cmd(s);
    return 0;
  } catch (const UsageError& e) {
    err << "flowdepth: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "flowdepth " << name << ": " << msg << '\n';
    return 1;
  }
}

}  // namespace flowdepth::cli
