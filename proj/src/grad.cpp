#include "flowdepth/grad.hpp"

#include <cfloat>
#include <cmath>
#include <string>

#include "flowdepth/parallel.hpp"
#include "flowdepth/triangulate.hpp"
#include "jet_math.hpp"
#include "sampling.hpp"
#include "ssim.hpp"
#include "summation.hpp"

namespace flowdepth {

std::string_view loss_name(LossId id) {
  switch (id) {
    case LossId::photometric:
      return "photometric";
    case LossId::cgdc:
      return "cgdc";
    case LossId::dpc:
      return "dpc";
    case LossId::bsca:
      return "bsca";
    case LossId::smoothness:
      return "smoothness";
  }
  return "unknown";
}

LossId parse_loss(std::string_view name) {
  for (auto id : {LossId::photometric, LossId::cgdc, LossId::dpc, LossId::bsca, LossId::smoothness})
    if (loss_name(id) == name) return id;
  throw InvalidArgumentError("unknown loss: " + std::string(name));
}

namespace {

using detail::dead_abs;
using detail::JetN;
using detail::seed;

/// Pose values shared by the forward and derivative paths.
struct Pose {
  RigidMotion motion;
  detail::RotationJet rotation;

  explicit Pose(const TwistParams& twist) : motion(twist.to_motion()), rotation(twist.rotation()) {}

  template <int N>
  std::array<JetN<N>, 9> r(int twist_slot) const {
    return rotation.lift<N>(twist_slot, motion.rotation());
  }
  template <int N>
  std::array<JetN<N>, 3> t(int twist_slot) const {
    std::array<JetN<N>, 3> out;
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = seed<N>(motion.translation()[i], twist_slot < 0 ? -1 : twist_slot + 3 + i);
    return out;
  }
};

/// Mirrors the scalar rigid-flow kernel operation for operation.
template <int N>
bool rigid_flow_jet(const CameraIntrinsics& k, const std::array<JetN<N>, 9>& r, const std::array<JetN<N>, 3>& t,
                    double u, double v, const JetN<N>& d, JetN<N>& fu, JetN<N>& fv) {
  const double xn = (u - k.cx) / k.fx;
  const double yn = (v - k.cy) / k.fy;
  const JetN<N> x = d * xn;
  const JetN<N> y = d * yn;
  const JetN<N>& z = d;
  const JetN<N> xs = r[0] * x + r[1] * y + r[2] * z + t[0];
  const JetN<N> ys = r[3] * x + r[4] * y + r[5] * z + t[1];
  const JetN<N> zs = r[6] * x + r[7] * y + r[8] * z + t[2];
  const bool ok = d.a > 0.0 && d.a <= DBL_MAX && zs.a > kMinDepth;
  if (ok) {
    fu = (k.fx * xs / zs + k.cx) - u;
    fv = (k.fy * ys / zs + k.cy) - v;
  } else {
    fu = JetN<N>(0.0);
    fv = JetN<N>(0.0);
  }
  return ok;
}

LossGradient empty_gradient(const LossInputs& in, const Targets& targets) {
  LossGradient g;
  g.d_depth = ScalarField(in.depth.height(), in.depth.width());
  if (targets.flow) {
    FlowField f(in.depth.height(), in.depth.width());
    f.valid = in.flow.valid.empty() ? Mask(in.depth.height(), in.depth.width(), 0) : in.flow.valid;
    g.d_flow = std::move(f);
  }
  return g;
}

void add_twist(LossGradient& g, const double* v, int slot, double scale) {
  for (int i = 0; i < 6; ++i) g.d_twist[i] += scale * v[slot + i];
}

// ---------------------------------------------------------------------------

LossGradient photometric_gradient(const LossInputs& in, const Targets& targets) {
  constexpr int N = 7;
  const int h = in.depth.height(), w = in.depth.width(), channels = in.image_s.channels();
  const Pose pose(in.twist);
  const FlowField fr = rigid_flow(in.camera, pose.motion, in.depth);
  const WarpResult wr = warp(in.image_s, fr);
  const LossValue value = photometric_loss(in.image_t, wr.image, wr.valid, in.alpha);

  LossGradient g = empty_gradient(in, targets);
  g.value = value.value;
  g.valid_pixel_count = value.valid_pixel_count;
  if (!targets.depth && !targets.twist) return g;

  const int twist_slot = targets.twist ? 1 : -1;
  const auto r = pose.r<N>(twist_slot);
  const auto t = pose.t<N>(twist_slot);
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  // Derivatives of every warped sample in (D(q), twist).
  std::vector<Eigen::Matrix<double, N, 1>> dwarp(plane * static_cast<std::size_t>(channels));
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      JetN<N> fu, fv;
      const bool ok =
          rigid_flow_jet<N>(in.camera, r, t, u, v, seed<N>(in.depth(u, v), targets.depth ? 0 : -1), fu, fv);
      JetN<N> x(u), y(v);
      if (ok) {
        x = JetN<N>(u) + fu;
        y = JetN<N>(v) + fv;
        if (!std::isfinite(x.a) || !std::isfinite(y.a)) x = JetN<N>(u), y = JetN<N>(v);
      }
      for (int c = 0; c < channels; ++c)
        dwarp[static_cast<std::size_t>(c) * plane + in.depth.index(u, v)] =
            detail::bilinear(in.image_s.channel(c), x, y).v;
    }
  });

  // Adjoint of the loss in every warped sample.
  const double n = static_cast<double>(value.valid_pixel_count);
  std::vector<double> adjoint(plane * static_cast<std::size_t>(channels), 0.0);
  double a[9], b[9];
  JetN<9> bj[9];
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!wr.valid(u, v)) continue;
      for (int c = 0; c < channels; ++c) {
        double* adj = adjoint.data() + static_cast<std::size_t>(c) * plane;
        detail::gather_window(in.image_t.channel(c), u, v, a);
        detail::gather_window(wr.image.channel(c), u, v, b);
        for (int k = 0; k < 9; ++k) bj[k] = JetN<9>(b[k], k);
        const JetN<9> s = detail::dissimilarity_window(a, bj);
        int k = 0;
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du, ++k) {
            const std::size_t q = in.depth.index(detail::reflect(u + du, w), detail::reflect(v + dv, h));
            adj[q] += in.alpha / (2.0 * channels * n) * s.v[k];
          }
        const double diff = in.image_t.channel(c)(u, v) - wr.image.channel(c)(u, v);
        if (std::abs(diff) > in.kink_tol)
          adj[in.depth.index(u, v)] += -(1.0 - in.alpha) / (channels * n) * (diff > 0.0 ? 1.0 : -1.0);
      }
    }

  for (std::size_t q = 0; q < plane; ++q)
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * plane + q;
      if (adjoint[i] == 0.0) continue;
      if (targets.depth) g.d_depth.data()[q] += adjoint[i] * dwarp[i][0];
      if (targets.twist) add_twist(g, dwarp[i].data(), 1, adjoint[i]);
    }
  return g;
}

// ---------------------------------------------------------------------------

template <int N>
void cgdc_accumulate(const LossInputs& in, const Pose& pose, const TriangulationResult& tri, double n, int depth_slot,
                     int twist_slot, int flow_slot, bool want_flow, LossGradient& g) {
  const auto r = pose.r<N>(twist_slot);
  const auto t = pose.t<N>(twist_slot);
  const auto& k = in.camera;
  for (int v = 0; v < in.depth.height(); ++v)
    for (int u = 0; u < in.depth.width(); ++u) {
      if (!tri.valid(u, v)) continue;
      const JetN<N> fu = seed<N>(in.flow.u(u, v), flow_slot);
      const JetN<N> fv = seed<N>(in.flow.v(u, v), flow_slot < 0 ? -1 : flow_slot + 1);
      const double ptx = (u - k.cx) / k.fx;
      const double pty = (v - k.cy) / k.fy;
      const JetN<N> psx = ((JetN<N>(u) + fu) - k.cx) / k.fx;
      const JetN<N> psy = ((JetN<N>(v) + fv) - k.cy) / k.fy;
      const JetN<N> r1p = r[0] * ptx + r[1] * pty + r[2];
      const JetN<N> r2p = r[3] * ptx + r[4] * pty + r[5];
      const JetN<N> r3p = r[6] * ptx + r[7] * pty + r[8];
      const JetN<N> num = (t[0] - psx * t[2]) + (t[1] - psy * t[2]);
      const JetN<N> den = (psx * r3p - r1p) + (psy * r3p - r2p);
      JetN<N> dg = num / den;
      if (in.stop_gradient) dg = JetN<N>(dg.a);
      const JetN<N> dc = seed<N>(in.depth(u, v), depth_slot);
      const JetN<N> norm = dc.a >= kEpsDiv ? dc : JetN<N>(kEpsDiv);
      const JetN<N> term = detail::dead_ratio(dg - dc, norm, in.kink_tol * norm.a);
      if (depth_slot >= 0) g.d_depth(u, v) += term.v[depth_slot] / n;
      if (twist_slot >= 0) add_twist(g, term.v.data(), twist_slot, 1.0 / n);
      if (want_flow) {
        g.d_flow->u(u, v) += term.v[flow_slot] / n;
        g.d_flow->v(u, v) += term.v[flow_slot + 1] / n;
      }
    }
}

LossGradient cgdc_gradient(const LossInputs& in, const Targets& targets) {
  const Pose pose(in.twist);
  const TriangulationResult tri = triangulate_depth(in.camera, pose.motion, in.flow);
  const LossValue value = cgdc_loss(tri, in.depth);
  LossGradient g = empty_gradient(in, targets);
  g.value = value.value;
  g.valid_pixel_count = value.valid_pixel_count;
  const double n = static_cast<double>(value.valid_pixel_count);
  if (!targets.twist && !targets.flow)
    cgdc_accumulate<1>(in, pose, tri, n, targets.depth ? 0 : -1, -1, -1, false, g);
  else
    cgdc_accumulate<9>(in, pose, tri, n, targets.depth ? 0 : -1, targets.twist ? 1 : -1, targets.flow ? 7 : -1,
                       targets.flow, g);
  return g;
}

// ---------------------------------------------------------------------------

template <int N>
void dpc_accumulate(const LossInputs& in, const Pose& pose, const DifferentialFields& fields, double n,
                    int depth_slot, int twist_slot, int flow_slot, bool want_flow, LossGradient& g) {
  const auto r = pose.r<N>(twist_slot);
  const auto t = pose.t<N>(twist_slot);
  const std::array<JetN<N>, 3> zero{JetN<N>(0.0), JetN<N>(0.0), JetN<N>(0.0)};
  const auto& k = in.camera;
  const bool inverse = in.differential.stencil == GradientStencil::inverse_depth;
  // Neighbour order: centre, left, right, up, down.
  constexpr int du[5] = {0, -1, 1, 0, 0};
  constexpr int dv[5] = {0, 0, 0, -1, 1};
  const int h = in.depth.height(), w = in.depth.width();

  std::vector<Eigen::Matrix<double, N, 1>> local(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      if (!fields.valid(u, v)) continue;
      JetN<N> d[5];
      for (int i = 0; i < 5; ++i) d[i] = seed<N>(in.depth(u + du[i], v + dv[i]), depth_slot < 0 ? -1 : depth_slot + i);
      // Translational flow at the four neighbours the divergence reads.
      JetN<N> ft[4];
      for (int i = 0; i < 4; ++i) {
        const int nu = u + du[i + 1], nv = v + dv[i + 1];
        const bool horizontal = i < 2;
        const JetN<N> fo =
            seed<N>(horizontal ? in.flow.u(nu, nv) : in.flow.v(nu, nv), flow_slot < 0 ? -1 : flow_slot + i);
        JetN<N> ru, rv;
        rigid_flow_jet<N>(k, r, zero, nu, nv, JetN<N>(1.0), ru, rv);
        ft[i] = fo - (horizontal ? ru : rv);
      }
      const JetN<N> div = (ft[1] - ft[0]) + (ft[3] - ft[2]);
      const JetN<N> s = d[0] + t[2];
      const JetN<N> cf = -(s / t[2] * div) - 4.0;
      const JetN<N> qu = JetN<N>(u) - (k.cx + k.fx * t[0] / t[2]);
      const JetN<N> qv = JetN<N>(v) - (k.cy + k.fy * t[1] / t[2]);
      JetN<N> cd;
      if (inverse) {
        const JetN<N> gu = 1.0 / (d[2] + t[2]) - 1.0 / (d[1] + t[2]);
        const JetN<N> gv = 1.0 / (d[4] + t[2]) - 1.0 / (d[3] + t[2]);
        cd = (qu * gu + qv * gv) * s;
      } else {
        const JetN<N> gu = d[2] - d[1];
        const JetN<N> gv = d[4] - d[3];
        cd = -((qu * gu + qv * gv) / s);
      }
      const JetN<N> den = dead_abs(cd, 0.0) + kEpsDpc;
      const JetN<N> term = detail::dead_ratio(cd - cf, den, in.kink_tol * std::max(den.a, 1.0));
      local[in.depth.index(u, v)] = term.v;
    }
  });

  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!fields.valid(u, v)) continue;
      const auto& lv = local[in.depth.index(u, v)];
      if (depth_slot >= 0)
        for (int i = 0; i < 5; ++i) g.d_depth(u + du[i], v + dv[i]) += lv[depth_slot + i] / n;
      if (twist_slot >= 0) add_twist(g, lv.data(), twist_slot, 1.0 / n);
      if (want_flow) {
        g.d_flow->u(u - 1, v) += lv[flow_slot] / n;
        g.d_flow->u(u + 1, v) += lv[flow_slot + 1] / n;
        g.d_flow->v(u, v - 1) += lv[flow_slot + 2] / n;
        g.d_flow->v(u, v + 1) += lv[flow_slot + 3] / n;
      }
    }
}

DifferentialFields dpc_fields(const LossInputs& in, const RigidMotion& motion) {
  const FlowField rot = rotational_flow(in.camera, motion.rotation(), in.depth.height(), in.depth.width());
  return differential_fields(in.camera, motion, in.depth, translational_flow(in.flow, rot), in.differential);
}

LossGradient dpc_gradient(const LossInputs& in, const Targets& targets) {
  const Pose pose(in.twist);
  const DifferentialFields fields = dpc_fields(in, pose.motion);
  const LossValue value = dpc_loss(fields);
  LossGradient g = empty_gradient(in, targets);
  g.value = value.value;
  g.valid_pixel_count = value.valid_pixel_count;
  const double n = static_cast<double>(value.valid_pixel_count);
  if (!targets.twist && !targets.flow)
    dpc_accumulate<5>(in, pose, fields, n, targets.depth ? 0 : -1, -1, -1, false, g);
  else
    dpc_accumulate<15>(in, pose, fields, n, targets.depth ? 0 : -1, targets.twist ? 5 : -1, targets.flow ? 11 : -1,
                       targets.flow, g);
  return g;
}

// ---------------------------------------------------------------------------

template <int N>
void bsca_accumulate(const LossInputs& in, const Pose& pose, const FlowField& fr, double n, int depth_slot,
                     int twist_slot, int flow_slot, bool want_flow, LossGradient& g) {
  const auto r = pose.r<N>(twist_slot);
  const auto t = pose.t<N>(twist_slot);
  for (int v = 0; v < in.depth.height(); ++v)
    for (int u = 0; u < in.depth.width(); ++u) {
      if (!fr.valid(u, v) || !in.flow.valid(u, v)) continue;
      JetN<N> fu, fv;
      rigid_flow_jet<N>(in.camera, r, t, u, v, seed<N>(in.depth(u, v), depth_slot), fu, fv);
      const JetN<N> ou = seed<N>(in.flow.u(u, v), flow_slot);
      const JetN<N> ov = seed<N>(in.flow.v(u, v), flow_slot < 0 ? -1 : flow_slot + 1);
      const JetN<N> den = (dead_abs(ou, 0.0) + dead_abs(ov, 0.0)) + kEpsFlow;
      const double tol = in.kink_tol * den.a;
      const JetN<N> du = fu - ou, dv = fv - ov;
      const JetN<N> term = std::abs(du.a) <= tol && std::abs(dv.a) <= tol
                               ? JetN<N>((std::abs(du.a) + std::abs(dv.a)) / den.a)
                               : (dead_abs(du, tol) + dead_abs(dv, tol)) / den;
      if (depth_slot >= 0) g.d_depth(u, v) += term.v[depth_slot] / n;
      if (twist_slot >= 0) add_twist(g, term.v.data(), twist_slot, 1.0 / n);
      if (want_flow) {
        g.d_flow->u(u, v) += term.v[flow_slot] / n;
        g.d_flow->v(u, v) += term.v[flow_slot + 1] / n;
      }
    }
}

LossGradient bsca_gradient(const LossInputs& in, const Targets& targets) {
  const Pose pose(in.twist);
  const FlowField fr = rigid_flow(in.camera, pose.motion, in.depth);
  const LossValue value = bsca_loss(fr, in.flow);
  LossGradient g = empty_gradient(in, targets);
  g.value = value.value;
  g.valid_pixel_count = value.valid_pixel_count;
  const double n = static_cast<double>(value.valid_pixel_count);
  if (!targets.twist && !targets.flow)
    bsca_accumulate<1>(in, pose, fr, n, targets.depth ? 0 : -1, -1, -1, false, g);
  else
    bsca_accumulate<9>(in, pose, fr, n, targets.depth ? 0 : -1, targets.twist ? 1 : -1, targets.flow ? 7 : -1,
                       targets.flow, g);
  return g;
}

// ---------------------------------------------------------------------------

LossGradient smoothness_gradient(const LossInputs& in, const Targets& targets) {
  const LossValue value = edge_aware_smoothness(in.depth, in.image_t);
  LossGradient g = empty_gradient(in, targets);
  g.value = value.value;
  g.valid_pixel_count = value.valid_pixel_count;
  if (!targets.depth) return g;
  const auto& d = in.depth;
  const auto& img = in.image_t;
  const int h = d.height(), w = d.width(), channels = img.channels();
  const double mean = detail::compensated_mean(d.values());
  double dl_dmean = 0.0;
  auto pair = [&](int ua, int va, int ub, int vb, double count) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s += std::abs(img.channel(c)(ub, vb) - img.channel(c)(ua, va));
    const double weight = std::exp(-s / channels);
    const double e = d(ub, vb) / mean - d(ua, va) / mean;
    if (std::abs(e) <= in.kink_tol) return;
    const double sign = e > 0.0 ? 1.0 : -1.0;
    const double coef = weight * sign / (count * mean);
    g.d_depth(ub, vb) += coef;
    g.d_depth(ua, va) -= coef;
    dl_dmean -= weight * std::abs(e) / (count * mean);
  };
  const double nx = static_cast<double>(h) * (w - 1), ny = static_cast<double>(h - 1) * w;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u + 1 < w; ++u) pair(u, v, u + 1, v, nx);
  for (int v = 0; v + 1 < h; ++v)
    for (int u = 0; u < w; ++u) pair(u, v, u, v + 1, ny);
  const double share = dl_dmean / static_cast<double>(d.size());
  for (double& x : g.d_depth.values()) x += share;
  return g;
}

}  // namespace

LossValue evaluate_loss(LossId id, const LossInputs& in) {
  const RigidMotion motion = in.twist.to_motion();
  switch (id) {
    case LossId::photometric: {
      const WarpResult wr = warp(in.image_s, rigid_flow(in.camera, motion, in.depth));
      return photometric_loss(in.image_t, wr.image, wr.valid, in.alpha);
    }
    case LossId::cgdc:
      return cgdc_loss(triangulate_depth(in.camera, motion, in.flow), in.depth);
    case LossId::dpc:
      return dpc_loss(dpc_fields(in, motion));
    case LossId::bsca:
      return bsca_loss(rigid_flow(in.camera, motion, in.depth), in.flow);
    case LossId::smoothness:
      return edge_aware_smoothness(in.depth, in.image_t);
  }
  throw InvalidArgumentError("unknown loss id");
}

LossGradient loss_gradient(LossId id, const LossInputs& in, const Targets& targets) {
  switch (id) {
    case LossId::photometric:
      return photometric_gradient(in, targets);
    case LossId::cgdc:
      return cgdc_gradient(in, targets);
    case LossId::dpc:
      return dpc_gradient(in, targets);
    case LossId::bsca:
      return bsca_gradient(in, targets);
    case LossId::smoothness:
      return smoothness_gradient(in, targets);
  }
  throw InvalidArgumentError("unknown loss id");
}

}  // namespace flowdepth
