#include "flowdepth/scene.hpp"

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "flowdepth/parallel.hpp"

namespace flowdepth {

std::string_view family_name(SceneFamily family) {
  switch (family) {
    case SceneFamily::affine_inverse_shift:
      return "affine-inverse-shift";
    case SceneFamily::fronto_plane:
      return "fronto-plane";
    case SceneFamily::step_edge:
      return "step-edge";
    case SceneFamily::sphere_bump:
      return "sphere-bump";
  }
  return "unknown";
}

SceneFamily parse_family(std::string_view name) {
  for (auto f : {SceneFamily::affine_inverse_shift, SceneFamily::fronto_plane, SceneFamily::step_edge,
                 SceneFamily::sphere_bump})
    if (family_name(f) == name) return f;
  throw InvalidArgumentError("unknown scene family: " + std::string(name));
}

double TextureSpec::evaluate(double u, double v, int channel) const {
  double value = mean;
  for (std::size_t k = 0; k < 3; ++k)
    value += amplitude[k] * std::sin(freq_u[k] * u + freq_v[k] * v + phase[k] + 0.9 * channel * static_cast<double>(k + 1));
  return value;
}

TextureSpec TextureSpec::flat(double mean) {
  TextureSpec t;
  t.mean = mean;
  t.amplitude = {0.0, 0.0, 0.0};
  return t;
}

bool DynamicObjectSpec::contains(double u, double v) const noexcept {
  if (shape == Shape::rectangle) return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  const double cu = 0.5 * (u_min + u_max), cv = 0.5 * (v_min + v_max);
  const double ru = 0.5 * (u_max - u_min), rv = 0.5 * (v_max - v_min);
  if (ru <= 0.0 || rv <= 0.0) return false;
  const double x = (u - cu) / ru, y = (v - cv) / rv;
  return x * x + y * y <= 1.0;
}

double scene_depth(const SceneSpec& spec, const RigidMotion& motion, double u, double v) {
  switch (spec.family) {
    case SceneFamily::affine_inverse_shift:
      return 1.0 / (spec.a + spec.b * u + spec.c * v) - motion.translation().z();
    case SceneFamily::fronto_plane:
      return spec.plane_depth;
    case SceneFamily::step_edge:
      return u < spec.edge_u ? spec.near_depth : spec.far_depth;
    case SceneFamily::sphere_bump: {
      const double du = u - spec.bump_u, dv = v - spec.bump_v;
      const double s = 1.0 - (du * du + dv * dv) / (spec.bump_radius * spec.bump_radius);
      return s > 0.0 ? spec.base_depth - spec.bump_height * s * s : spec.base_depth;
    }
  }
  return 0.0;
}

Eigen::Vector2d analytic_depth_gradient(const SceneSpec& spec, const Eigen::Vector2d& pixel) {
  const double u = pixel.x(), v = pixel.y();
  switch (spec.family) {
    case SceneFamily::affine_inverse_shift: {
      const double g = spec.a + spec.b * u + spec.c * v;
      return {-spec.b / (g * g), -spec.c / (g * g)};
    }
    case SceneFamily::fronto_plane:
    case SceneFamily::step_edge:
      return {0.0, 0.0};
    case SceneFamily::sphere_bump: {
      const double r2 = spec.bump_radius * spec.bump_radius;
      const double du = u - spec.bump_u, dv = v - spec.bump_v;
      const double s = 1.0 - (du * du + dv * dv) / r2;
      if (s <= 0.0) return {0.0, 0.0};
      const double k = 4.0 * spec.bump_height * s / r2;
      return {k * du, k * dv};
    }
  }
  return {0.0, 0.0};
}

namespace {

// A smooth surface piece with its own translation and ownership region.
struct Piece {
  std::function<double(double, double)> depth;
  Eigen::Vector3d translation;
  std::function<bool(double, double)> owns;
};

struct Projected {
  Eigen::Vector2d flow;
  double z_source = 0.0;
  bool ok = false;
};

class Renderer {
 public:
  Renderer(const SceneSpec& spec, const CameraIntrinsics& camera, const RigidMotion& motion)
      : camera_(camera), rotation_(motion.rotation()) {
    const auto* dyn = spec.dynamic ? &*spec.dynamic : nullptr;
    auto outside_object = [dyn](double u, double v) { return dyn == nullptr || !dyn->contains(u, v); };
    auto surface = [&spec, motion](double u, double v) { return scene_depth(spec, motion, u, v); };
    if (spec.family == SceneFamily::step_edge) {
      const double edge = spec.edge_u, near = spec.near_depth, far = spec.far_depth;
      pieces_.push_back({[near](double, double) { return near; }, motion.translation(),
                         [edge, outside_object](double u, double v) { return u < edge && outside_object(u, v); }});
      pieces_.push_back({[far](double, double) { return far; }, motion.translation(),
                         [edge, outside_object](double u, double v) { return u >= edge && outside_object(u, v); }});
    } else {
      pieces_.push_back({surface, motion.translation(), outside_object});
    }
    if (dyn) {
      pieces_.push_back({surface, motion.translation() + dyn->translation,
                         [dyn](double u, double v) { return dyn->contains(u, v); }});
    }
  }

  const std::vector<Piece>& pieces() const { return pieces_; }

  int owner(double u, double v) const {
    for (std::size_t i = 0; i < pieces_.size(); ++i)
      if (pieces_[i].owns(u, v)) return static_cast<int>(i);
    return 0;
  }

  Projected project(const Piece& piece, double u, double v) const {
    Projected out;
    const double d = piece.depth(u, v);
    if (!(d > 0.0)) return out;
    const Eigen::Vector3d x = d * Eigen::Vector3d((u - camera_.cx) / camera_.fx, (v - camera_.cy) / camera_.fy, 1.0);
    const Eigen::Vector3d y = rotation_ * x + piece.translation;
    if (!(y.z() > kMinDepth)) return out;
    out.flow = {camera_.fx * y.x() / y.z() + camera_.cx - u, camera_.fy * y.y() / y.z() + camera_.cy - v};
    out.z_source = y.z();
    out.ok = true;
    return out;
  }

  // Target pixel of `piece` that lands on source position `ps` (Newton).
  std::optional<std::pair<Eigen::Vector2d, double>> invert(const Piece& piece, const Eigen::Vector2d& ps) const {
    Eigen::Vector2d p = ps;
    if (auto first = project(piece, ps.x(), ps.y()); first.ok) p = ps - first.flow;
    constexpr double h = 1e-6;
    for (int it = 0; it < 50; ++it) {
      const auto here = project(piece, p.x(), p.y());
      if (!here.ok) return std::nullopt;
      const Eigen::Vector2d residual = p + here.flow - ps;
      if (residual.cwiseAbs().maxCoeff() < 1e-11) return std::make_pair(p, here.z_source);
      Eigen::Matrix2d jac = Eigen::Matrix2d::Identity();
      for (int axis = 0; axis < 2; ++axis) {
        Eigen::Vector2d step = Eigen::Vector2d::Zero();
        step[axis] = h;
        const auto plus = project(piece, p.x() + step.x(), p.y() + step.y());
        const auto minus = project(piece, p.x() - step.x(), p.y() - step.y());
        if (!plus.ok || !minus.ok) return std::nullopt;
        jac.col(axis) += (plus.flow - minus.flow) / (2.0 * h);
      }
      p -= jac.partialPivLu().solve(residual);
      if (!p.allFinite()) return std::nullopt;
    }
    return std::nullopt;
  }

  // Visible piece and its target pixel at source position ps (z-buffer).
  std::optional<std::pair<int, Eigen::Vector2d>> visible(const Eigen::Vector2d& ps, double* z_out = nullptr) const {
    std::optional<std::pair<int, Eigen::Vector2d>> best;
    double best_z = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto hit = invert(pieces_[i], ps);
      if (!hit || !pieces_[i].owns(hit->first.x(), hit->first.y())) continue;
      if (hit->second < best_z) {
        best_z = hit->second;
        best = std::make_pair(static_cast<int>(i), hit->first);
      }
    }
    if (z_out) *z_out = best_z;
    return best;
  }

 private:
  CameraIntrinsics camera_;
  Eigen::Matrix3d rotation_;
  std::vector<Piece> pieces_;
};

double flow_divergence_at(const CameraIntrinsics& k, const Eigen::Matrix3d& r, const Eigen::Vector3d& t, double u,
                          double v, double d, const Eigen::Vector2d& grad) {
  const Eigen::Vector3d m((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d y = r * (d * m) + t;
  const Eigen::Vector3d dy_du = r * (grad.x() * m + d * Eigen::Vector3d(1.0 / k.fx, 0.0, 0.0));
  const Eigen::Vector3d dy_dv = r * (grad.y() * m + d * Eigen::Vector3d(0.0, 1.0 / k.fy, 0.0));
  const double z2 = y.z() * y.z();
  const double dfu_du = k.fx * (dy_du.x() * y.z() - y.x() * dy_du.z()) / z2 - 1.0;
  const double dfv_dv = k.fy * (dy_dv.y() * y.z() - y.y() * dy_dv.z()) / z2 - 1.0;
  return dfu_du + dfv_dv;
}

void validate(const SceneSpec& spec, const RigidMotion& motion, int height, int width) {
  if (height < 1 || width < 1) throw InvalidSceneError("scene grid must be non-empty");
  const auto& tex = spec.texture;
  const double swing = std::abs(tex.amplitude[0]) + std::abs(tex.amplitude[1]) + std::abs(tex.amplitude[2]);
  if (!(tex.mean - swing >= 0.0 && tex.mean + swing <= 1.0))
    throw InvalidSceneError("texture must stay within [0, 1]");
  if (tex.channels != 1 && tex.channels != 3) throw InvalidSceneError("texture channels must be 1 or 3");
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      if (spec.family == SceneFamily::affine_inverse_shift && !(spec.a + spec.b * u + spec.c * v > 0.0))
        throw InvalidSceneError("a + b u + c v must be positive over the grid");
      const double d = scene_depth(spec, motion, u, v);
      if (!(d > 0.0) || !std::isfinite(d)) throw InvalidSceneError("scene depth must be positive over the grid");
    }
  if (spec.dynamic) {
    const auto& o = *spec.dynamic;
    if (!(o.u_min >= 1.0 && o.v_min >= 1.0 && o.u_max <= width - 2.0 && o.v_max <= height - 2.0 &&
          o.u_min < o.u_max && o.v_min < o.v_max))
      throw InvalidSceneError("dynamic object must lie strictly inside the image");
  }
}

}  // namespace

SceneBundle synthesize(const SceneSpec& spec, const CameraIntrinsics& camera, const RigidMotion& motion, int height,
                       int width) {
  validate(spec, motion, height, width);
  SceneBundle b{camera,
                motion,
                DepthMap(height, width),
                FlowField{},
                Image(height, width, spec.texture.channels),
                Image(height, width, spec.texture.channels),
                GradientField{Grid<double>(height, width), Grid<double>(height, width)},
                ScalarField(height, width),
                Mask(height, width, 0),
                Mask(height, width, 0)};

  const Renderer renderer(spec, camera, motion);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      b.depth_gt(u, v) = scene_depth(spec, motion, u, v);
      const Eigen::Vector2d g = analytic_depth_gradient(spec, {u, v});
      b.analytic_depth_gradient.du(u, v) = g.x();
      b.analytic_depth_gradient.dv(u, v) = g.y();
      if (spec.dynamic && spec.dynamic->contains(u, v)) b.dynamic_mask(u, v) = 1;
    }

  b.flow_gt = rigid_flow(camera, motion, b.depth_gt);
  const int channels = spec.texture.channels;
  parallel_rows(height, [&](int v) {
    for (int u = 0; u < width; ++u) {
      const int own = renderer.owner(u, v);
      const Piece& piece = renderer.pieces()[static_cast<std::size_t>(own)];
      const auto here = renderer.project(piece, u, v);
      if (b.dynamic_mask(u, v)) {
        b.flow_gt.u(u, v) = here.ok ? here.flow.x() : 0.0;
        b.flow_gt.v(u, v) = here.ok ? here.flow.y() : 0.0;
        b.flow_gt.valid(u, v) = here.ok ? 1 : 0;
      }
      b.analytic_flow_divergence(u, v) =
          here.ok ? flow_divergence_at(camera, motion.rotation(), piece.translation, u, v, b.depth_gt(u, v),
                                       {b.analytic_depth_gradient.du(u, v), b.analytic_depth_gradient.dv(u, v)})
                  : 0.0;
      if (here.ok) {
        double z_visible = 0.0;
        const auto seen = renderer.visible(Eigen::Vector2d(u, v) + here.flow, &z_visible);
        b.occluded(u, v) = (seen && seen->first != own && z_visible < here.z_source - 1e-9) ? 1 : 0;
      }
      for (int c = 0; c < channels; ++c) b.image_t.channel(c)(u, v) = spec.texture.evaluate(u, v, c);

      const auto source_hit = renderer.visible(Eigen::Vector2d(u, v));
      for (int c = 0; c < channels; ++c)
        b.image_s.channel(c)(u, v) =
            source_hit ? spec.texture.evaluate(source_hit->second.x(), source_hit->second.y(), c) : spec.texture.mean;
    }
  });
  return b;
}

SceneBundle SceneFile::synthesize() const { return flowdepth::synthesize(spec, camera, motion(), height, width); }

// ---------------------------------------------------------------------------
// key=value scene files

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(out))
    throw InvalidArgumentError("scene key '" + key + "': not a finite number: '" + t + "'");
  return out;
}

int to_int(const std::string& key, std::string_view text) {
  const double d = to_double(key, text);
  if (d != std::floor(d) || d < 1 || d > 1 << 20) throw InvalidArgumentError("scene key '" + key + "': bad integer");
  return static_cast<int>(d);
}

template <std::size_t N>
std::array<double, N> to_list(const std::string& key, std::string_view text) {
  std::array<double, N> out{};
  std::size_t i = 0;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    if (i >= N) throw InvalidArgumentError("scene key '" + key + "': expected " + std::to_string(N) + " values");
    out[i++] = to_double(key, text.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (i != N) throw InvalidArgumentError("scene key '" + key + "': expected " + std::to_string(N) + " values");
  return out;
}

std::string num(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

template <std::size_t N>
std::string list(const std::array<double, N>& xs) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + num(xs[i]);
  return out;
}

std::string list(const Eigen::Vector3d& x) { return list(std::array<double, 3>{x.x(), x.y(), x.z()}); }

}  // namespace

SceneFile parse_scene(std::string_view text, std::optional<std::pair<int, int>> size_override) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InvalidArgumentError("scene line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (kv.count(key)) throw InvalidArgumentError("scene key '" + key + "' given twice");
    kv[key] = trim(std::string_view(t).substr(eq + 1));
  }

  static const std::set<std::string> known{
      "family",      "width",         "height",           "fx",          "fy",          "cx",
      "cy",          "rotation",      "translation",      "a",           "b",           "c",
      "plane_depth", "near_depth",    "far_depth",        "edge_u",      "base_depth",  "bump_height",
      "bump_radius", "bump_u",        "bump_v",           "texture_mean", "texture_amplitude", "texture_freq_u",
      "texture_freq_v", "texture_phase", "channels",      "dynamic",     "dynamic_box", "dynamic_translation"};
  for (const auto& [key, value] : kv)
    if (!known.count(key)) throw InvalidArgumentError("unknown scene key '" + key + "'");

  auto has = [&](const char* k) { return kv.count(k) != 0; };
  auto get = [&](const char* k) { return to_double(k, kv.at(k)); };

  SceneFile f;
  if (has("width")) f.width = to_int("width", kv["width"]);
  if (has("height")) f.height = to_int("height", kv["height"]);
  if (size_override) {
    f.height = size_override->first;
    f.width = size_override->second;
  }
  auto& s = f.spec;
  if (has("family")) s.family = parse_family(kv["family"]);
  const double fx = has("fx") ? get("fx") : 100.0;
  const double fy = has("fy") ? get("fy") : 100.0;
  const double cx = has("cx") ? get("cx") : f.width / 2.0;
  const double cy = has("cy") ? get("cy") : f.height / 2.0;
  f.camera = CameraIntrinsics(fx, fy, cx, cy);
  if (has("rotation")) {
    const auto r = to_list<3>("rotation", kv["rotation"]);
    f.rotation = {r[0], r[1], r[2]};
  }
  if (has("translation")) {
    const auto t = to_list<3>("translation", kv["translation"]);
    f.translation = {t[0], t[1], t[2]};
  }
  if (has("a")) s.a = get("a");
  if (has("b")) s.b = get("b");
  if (has("c")) s.c = get("c");
  if (has("plane_depth")) s.plane_depth = get("plane_depth");
  if (has("near_depth")) s.near_depth = get("near_depth");
  if (has("far_depth")) s.far_depth = get("far_depth");
  s.edge_u = has("edge_u") ? get("edge_u") : f.width / 2.0;
  if (has("base_depth")) s.base_depth = get("base_depth");
  if (has("bump_height")) s.bump_height = get("bump_height");
  s.bump_radius = has("bump_radius") ? get("bump_radius") : std::min(f.width, f.height) / 3.0;
  s.bump_u = has("bump_u") ? get("bump_u") : f.width / 2.0;
  s.bump_v = has("bump_v") ? get("bump_v") : f.height / 2.0;
  if (has("texture_mean")) s.texture.mean = get("texture_mean");
  if (has("texture_amplitude")) s.texture.amplitude = to_list<3>("texture_amplitude", kv["texture_amplitude"]);
  if (has("texture_freq_u")) s.texture.freq_u = to_list<3>("texture_freq_u", kv["texture_freq_u"]);
  if (has("texture_freq_v")) s.texture.freq_v = to_list<3>("texture_freq_v", kv["texture_freq_v"]);
  if (has("texture_phase")) s.texture.phase = to_list<3>("texture_phase", kv["texture_phase"]);
  if (has("channels")) s.texture.channels = to_int("channels", kv["channels"]);

  const std::string dyn = has("dynamic") ? kv["dynamic"] : "none";
  if (dyn != "none") {
    DynamicObjectSpec o;
    if (dyn == "rectangle")
      o.shape = DynamicObjectSpec::Shape::rectangle;
    else if (dyn == "ellipse")
      o.shape = DynamicObjectSpec::Shape::ellipse;
    else
      throw InvalidArgumentError("dynamic must be none, rectangle or ellipse");
    if (!has("dynamic_box") || !has("dynamic_translation"))
      throw InvalidArgumentError("dynamic objects need dynamic_box and dynamic_translation");
    const auto box = to_list<4>("dynamic_box", kv["dynamic_box"]);
    o.u_min = box[0];
    o.v_min = box[1];
    o.u_max = box[2];
    o.v_max = box[3];
    const auto t = to_list<3>("dynamic_translation", kv["dynamic_translation"]);
    o.translation = {t[0], t[1], t[2]};
    s.dynamic = o;
  }
  return f;
}

std::string format_scene(const SceneFile& f) {
  const auto& s = f.spec;
  std::ostringstream out;
  out << "family=" << family_name(s.family) << '\n'
      << "width=" << f.width << '\n'
      << "height=" << f.height << '\n'
      << "fx=" << num(f.camera.fx) << '\n'
      << "fy=" << num(f.camera.fy) << '\n'
      << "cx=" << num(f.camera.cx) << '\n'
      << "cy=" << num(f.camera.cy) << '\n'
      << "rotation=" << list(f.rotation) << '\n'
      << "translation=" << list(f.translation) << '\n'
      << "a=" << num(s.a) << '\n'
      << "b=" << num(s.b) << '\n'
      << "c=" << num(s.c) << '\n'
      << "plane_depth=" << num(s.plane_depth) << '\n'
      << "near_depth=" << num(s.near_depth) << '\n'
      << "far_depth=" << num(s.far_depth) << '\n'
      << "edge_u=" << num(s.edge_u) << '\n'
      << "base_depth=" << num(s.base_depth) << '\n'
      << "bump_height=" << num(s.bump_height) << '\n'
      << "bump_radius=" << num(s.bump_radius) << '\n'
      << "bump_u=" << num(s.bump_u) << '\n'
      << "bump_v=" << num(s.bump_v) << '\n'
      << "texture_mean=" << num(s.texture.mean) << '\n'
      << "texture_amplitude=" << list(s.texture.amplitude) << '\n'
      << "texture_freq_u=" << list(s.texture.freq_u) << '\n'
      << "texture_freq_v=" << list(s.texture.freq_v) << '\n'
      << "texture_phase=" << list(s.texture.phase) << '\n'
      << "channels=" << s.texture.channels << '\n';
  if (!s.dynamic) {
    out << "dynamic=none\n";
  } else {
    const auto& o = *s.dynamic;
    out << "dynamic=" << (o.shape == DynamicObjectSpec::Shape::rectangle ? "rectangle" : "ellipse") << '\n'
        << "dynamic_box=" << list(std::array<double, 4>{o.u_min, o.v_min, o.u_max, o.v_max}) << '\n'
        << "dynamic_translation=" << list(o.translation) << '\n';
  }
  return out.str();
}

SceneFile load_scene(const std::string& path, std::optional<std::pair<int, int>> size_override) {
  std::ifstream in(path);
  if (!in) throw InvalidArgumentError("cannot open scene file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str(), size_override);
}

}  // namespace flowdepth
